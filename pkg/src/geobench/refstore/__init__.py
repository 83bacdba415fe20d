from .catalog import Catalog, CatalogError, default_catalog_path
from .store import ConfigProfile, StoreError, StoreHandle, load_store

__all__ = [
    "Catalog",
    "CatalogError",
    "ConfigProfile",
    "StoreError",
    "StoreHandle",
    "default_catalog_path",
    "load_store",
]
