"""Topic-guided multi-document abstract generation at desk scale.

The pipeline: a topic detector classifies input paragraphs, paragraphs are
grouped by topic, a BiGRU encodes each group, a recurrent topic predictor
walks the abstract sentence by sentence, and a pointer-generator decoder
writes each sentence with copying.  Everything runs on a small tape-based
autodiff core over numpy arrays.
"""

from .autodiff import Adam, Tape, Tensor, backward, tape, using_dtype
from .checkpoint import load_into, load_tensors, save_tensors
from .config import RunConfig, format_config, load_config
from .corpus import (DatasetSplits, RawArticle, SummarizationExample, Topic,
                     TopicParagraphExample, TopicSchema, build_detector_dataset,
                     label_frequency_stats, load_articles,
                     load_summarization_dataset, load_topic_schema,
                     write_summarization_dataset)
from .detector import (DetectorModel, MeanEmbeddingEncoder, ParagraphEncoder,
                       detect_topics, evaluate_detector, train_detector)
from .generator import (DecodeConfig, GeneratorModel, TopicGroups,
                        compute_losses, decode_sentence, encode_topics,
                        generate_abstract, group_paragraphs, init_embeddings,
                        predict_topic_step, teacher_forced_outputs,
                        token_distribution, train_generator)
from .rouge import (EvalReport, RougeScore, dedup_sentences, evaluate_corpus,
                    rouge_l, rouge_n)
from .text import Vocabulary, split_sentences, tokenize

__version__ = "0.1.0"
