"""Bridge real transformer checkpoints to the binary embedding-store format."""

from .extract import DimMismatchError, ExtractionConfig, ExtractionError, extract
from .rfemb import Store, StoreFormatError, load_problems, merge_stores, read_store, write_store
from .verify import VerifyReport, verify

__version__ = "0.1.0"
