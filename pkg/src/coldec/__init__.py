"""Collaborative decoding with contextual biasing over CIF token embeddings."""
from .biasing import AttentionProjection, AttentionRecord, PurifyConfig, phrase_attention, purify
from .cif import AcousticSequence, TailPolicy, TokenAcousticSequence, integrate_and_fire
from .cpn_encoder import BiasingList, ContextBank, CpnEncoderWeights, Phrase, encode_list, prepare_phrase
from .decoder import (DecodeConfig, Hypothesis, ScriptedSource, SanAsrSource, collaborative_beam_search,
                      cpn_step, make_cpn_target)
from .fineco import (SelectionConfig, TokenKeySet, average_attention, build_token_keys, select_phrases,
                     token_attention)
from .kernels import BACKEND
from .model import Model, random_model
from .vocab import Vocabulary

__version__ = "0.1.0"
