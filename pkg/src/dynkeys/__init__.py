"""Key-frame selection and sequence recovery with pole-based dynamics dictionaries."""
from .coding import (
    AtomicCode,
    SingularSystemError,
    decode,
    encode_lasso,
    min_norm_code,
    pinv_code,
)
from .dictionary import (
    DuplicatePoleError,
    DynDictionary,
    PoleSet,
    build_dictionary,
    extend_rows,
    init_pole_ring,
    load_dictionary,
    save_dictionary,
    truncate_rows,
)
from .hpim import EmptySelectionError, PipelineResult, interpolate, pipeline
from .learning import DivergenceError, evaluate_dictionary, pole_gradient, train_dictionary
from .online import OnlineState, init_online, predict_next, run_stream, step
from .pck import PckConfig, eval_pck
from .selection import (
    BudgetExceededError,
    Indicator,
    OptimizationError,
    SelectionResult,
    SelectorConfig,
    baseline_select,
    brute_force_select,
    loss,
    loss_gradient,
    reconstruction_error,
    recovery,
    select_keyframes,
)
from .skeleton import SkeletonSequence, read_csv, read_jsonl, write_csv, write_jsonl
from .synth import SynthSpec, synth_corpus

__version__ = "0.1.0"
