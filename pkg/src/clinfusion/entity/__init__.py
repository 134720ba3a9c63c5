from .lexicon import (ENTITY_TYPES, EntityCorpusDoc, EntitySpan, Lexicon, default_terminators, default_triggers,
                      detect_negation, entity_document, filter_negated, load_triggers, match_entities, with_breaks)
from .tagger import (TAGS, Tagger, TaggerConfig, check_bio, read_tagged, spans_from_tags, tagger_forward,
                     tagger_train, tags_from_spans)

__all__ = [
    "ENTITY_TYPES", "EntityCorpusDoc", "EntitySpan", "Lexicon", "TAGS", "Tagger", "TaggerConfig", "check_bio",
    "default_terminators", "default_triggers", "detect_negation", "entity_document", "filter_negated",
    "load_triggers", "match_entities", "read_tagged", "spans_from_tags", "tagger_forward", "tagger_train",
    "tags_from_spans", "with_breaks",
]
