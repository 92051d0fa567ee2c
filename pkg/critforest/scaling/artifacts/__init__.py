from critforest.scaling.artifacts.manifest import Manifest
from critforest.scaling.artifacts.tabular import read_csv, read_json, write_csv, write_json
