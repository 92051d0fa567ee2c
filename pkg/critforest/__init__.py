# Namespace package, see https://setuptools.pypa.io/en/latest/pkg_resources.html#namespace-package-support
try:
    __import__('pkg_resources').declare_namespace(__name__)
except ImportError:
    from pkgutil import extend_path
    __path__ = extend_path(__path__, __name__)
