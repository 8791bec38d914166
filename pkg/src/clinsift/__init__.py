"""clinsift: iterative topic filtering for clinically relevant social-media text.

The library alternates between LDA topic modeling and concept-based relevance
scoring to distill a noisy document stream down to its clinically relevant
core, and ships the evaluation analytics (coherence, enrichment tables,
category preservation, keyword timelines) needed to audit a run.
"""

__version__ = "0.1.0"

from .corpus import Corpus, Document, RawRecord, TextNormalizer, ingest, preprocess, subset
from .authors import CredentialPattern, filter_hcp, is_hcp
from .concepts import ConceptMention, LexiconEntry, TriggerMatcher, annotate, build_matcher, count_triggers
from .lda import LdaConfig, TopicModel, doc_topic_mass, fit, umass_coherence
from .relevance import (
    RelevanceTable,
    TopicScoreSet,
    filter_documents,
    iterative_relevance,
    prefilter_concepts,
    relevance,
    score_topics,
    threshold_topics,
)
from .pipeline import IterationRecord, PipelineConfig, PipelineResult, WindowSpec, run, run_windows

__all__ = [
    "__version__",
    "Corpus",
    "Document",
    "RawRecord",
    "TextNormalizer",
    "ingest",
    "preprocess",
    "subset",
    "CredentialPattern",
    "filter_hcp",
    "is_hcp",
    "ConceptMention",
    "LexiconEntry",
    "TriggerMatcher",
    "annotate",
    "build_matcher",
    "count_triggers",
    "LdaConfig",
    "TopicModel",
    "doc_topic_mass",
    "fit",
    "umass_coherence",
    "RelevanceTable",
    "TopicScoreSet",
    "filter_documents",
    "iterative_relevance",
    "prefilter_concepts",
    "relevance",
    "score_topics",
    "threshold_topics",
    "IterationRecord",
    "PipelineConfig",
    "PipelineResult",
    "WindowSpec",
    "run",
    "run_windows",
]
