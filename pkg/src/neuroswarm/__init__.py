"""Collective-escape swarm simulator on a shunting neural lattice."""

from .binn import (ActivityGrid, GridSpec, IntegrationDivergedError,
                   ShuntingParams, lateral_weight, neighbor_activities, relax,
                   stamp_inputs, step_activity)
from .engine import (BatchReport, RunConfig, RunMetrics, RunResult,
                     ScenarioError, distance_based_adapt, materialize, run,
                     run_batch, terminated, tick)
from .forces import (BoxedInError, ForceParams, NoLeaderError, VirtualForce,
                     adapt_weights, attractive_force, command_neuron_max,
                     command_neuron_min, repulsive_force_escape,
                     repulsive_force_follow, resultant_force, velocity_map)
from .scenario import config_to_dict, parse_scenario, serialize_config
from .swarm import (Cause, Mode, ModeEvent, RobotState, assign_hierarchy,
                    avr_distance, kinematic_step, transition_mode)
from .world import (Observation, Obstacle, Threat, WorldState, gamma,
                    grid_to_world, sense, step_obstacles, world_to_grid)

__version__ = "0.1.0"
