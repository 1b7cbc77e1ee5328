from .caption import RoleEvalRecord, cider_d, cider_d_scores, lcs_length, rouge_l, rouge_l_score, tokenize
from .report import write_metrics_json, write_per_verb_csv
from .verb import VerbEvalRecord, acc_at_k, f1_at_5, per_verb_scores, rec_at_5

__all__ = [
    "RoleEvalRecord", "VerbEvalRecord", "acc_at_k", "cider_d", "cider_d_scores", "f1_at_5",
    "lcs_length", "per_verb_scores", "rec_at_5", "rouge_l", "rouge_l_score", "tokenize",
    "write_metrics_json", "write_per_verb_csv",
]
