"""RIS-assisted UAV data collection: channel models, discrete phase-shift
optimization, deadline-constrained scheduling environment, PPO agent, rotary
wing energy model and an experiment harness."""

from .channel import (
    CompositeGain,
    EnvGeometry,
    RadioParams,
    Vec3,
    array_response,
    composite_gain,
    direct_gain,
    elevation_angle,
    los_probability,
    rate,
    ris_device_channel,
    ris_uav_channel,
    snr,
)
from .ris_optim import (
    PhaseConfig,
    bcd_optimize,
    brute_force_optimize,
    build_links,
    sum_rate,
)
from .env import (
    Action,
    DataCollectionEnv,
    EpisodeConfig,
    EnvState,
    IoTDevice,
    StepResult,
    action_space_size,
    load_episode,
    replay_episode,
    save_episode,
)
from .agent import (
    Hyperparams,
    PolicyValueNets,
    compute_advantages,
    encode_state,
    greedy_action,
    init_nets,
    load_checkpoint,
    policy_forward,
    ppo_update,
    save_checkpoint,
    train,
    value_forward,
)
from .energy import (
    PathSegment,
    UAVPowerParams,
    energy_efficiency,
    hover_power,
    power,
    segment_energy,
    trajectory_energy,
)
from .harness import (
    ExperimentConfig,
    POLICY_KINDS,
    RunRecord,
    dump_config,
    emit,
    load_config,
    run_policy,
    sweep,
)

__version__ = "0.1.0"
