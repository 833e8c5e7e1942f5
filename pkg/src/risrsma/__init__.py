"""Link-level simulator and optimizer for RIS-assisted multi-cell downlinks
with rate-splitting multiple access."""

from .analysis import (
    MomentHelpers,
    QuadraticForms,
    Quadrature,
    bs_jensen_rates,
    bs_mgf_rates,
    ergodic_common_rate_jensen,
    ergodic_common_rate_mgf,
    ergodic_private_rate_jensen,
    ergodic_private_rate_mgf,
    ergodic_sum_rate,
    gauss_laguerre,
    moment_helpers,
    nors_jensen_rate,
    private_sinr_ratio,
    quadratic_forms,
    selection_embedded_sinr,
)
from .channel import (
    ChannelSet,
    LosComponents,
    cascaded_channel,
    los_components,
    sample_channels,
    steering_vector,
)
from .montecarlo import ComparisonVerdict, MonteCarloReport, compare, empirical_ergodic_rates
from .optimize import (
    PipelineResult,
    design_ideal_phases,
    design_service_selection,
    ed_protocol,
    full_pipeline,
    golden_section_power,
    gs_power_for_bs,
    heuristic_power_split,
    qos_selection_search,
    td_protocol,
)
from .ris import ReflectionDesign, practical_reflection, reflection_matrix, validate_selection
from .rsma import (
    PowerSplit,
    RatePoint,
    instantaneous_rates,
    mrt_common_precoder,
    nors_rate,
    split_power,
    zf_precoders,
)
from .scenario import (
    RngStream,
    Scenario,
    ScenarioConfig,
    build_scenario,
    load_scenario_config,
    make_streams,
    path_loss,
    ring_scenario,
)

__version__ = "0.1.0"
