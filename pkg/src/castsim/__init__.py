"""castsim: casting-manipulator simulation and control toolkit."""

from .dynamics import (Caster3DGeometry, DynMatrices, Flight3DState,
                       JointState, PlanarFlightState, RobotParams,
                       anchor_points_3d, cable_matrix_3d, coriolis_matrix,
                       flight_accel_3d, flight_accel_planar,
                       forward_kinematics, gravity_vector, integrate_step,
                       jacobian, mass_matrix, one_cable_accel,
                       planar_joint_accel, potential_energy, throw_state_3d)
from .control import (ForceSchedule, ImpulseController, LinearizingOutput,
                      LookupTable, RefPoint, SwingReference,
                      TargetObservation, TrackingGains, beta_coefficient,
                      braking_time, build_lookup_table, constant_force_opt,
                      linearizing_feedback, load_lookup_table,
                      predict_x_land, replan_on_measurement,
                      save_lookup_table, simulate_zero_dynamics,
                      swing_reference, tracking_inputs, zero_dynamics_check)
from .mintime import (BangBangPlan, MinTime3DOptions, MinTime3DSolution,
                      SweepResult, SweepRow, bangbang_min_time,
                      bangbang_oracle, min_time_3d, rollout_3d,
                      save_sweep_csv, simulate_plan, throwing_angle_sweep)
from .vision import (Homography, apply_homography, estimate_homography,
                     load_correspondences_csv, synth_observer)
from .scenario import (ControllerSpec, Scenario, TargetModel, TimingSpec,
                       VisionSpec, load_scenario, save_scenario, seed_for)
from .sim import (CastingSim, Outcome, read_trace, replay_check,
                  run_scenario, write_trace)
from .errors import (CastsimError, DegenerateGeometryError,
                     IntegrationDivergedError, NeverLandsError,
                     ScenarioError, SingularDecouplingError,
                     TraceMismatchError, UnilateralInputError)

__version__ = "0.1.0"
