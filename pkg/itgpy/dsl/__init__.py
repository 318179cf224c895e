from .itg import (
    ITGReader, ITGWriter, ITGParseError, ParseDiagnostic, parse,
    print_model, model_to_dict, model_from_dict
)
from itgpy.model import SourceSpan
