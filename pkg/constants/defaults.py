"""
Numerical defaults shared across the pipeline.

Model, training and inference configs take their default values from here so that
the CLI, the configs and the tests agree on one set of numbers.
"""

# Missing-data indicator written by the echosounder export tool
NAN_INDICATOR = -9.9e37

# Shard store
SHARD_LENGTH = 128
SHARD_FORMAT_VERSION = 1
CHECKPOINT_FORMAT_VERSION = 1

# Surface-line anomaly removal
SURFACE_COARSE_KERNEL = 201
SURFACE_COARSE_THRESHOLD = 5.0
SURFACE_FINE_KERNEL = 31
SURFACE_FINE_THRESHOLD = 4.0
IQR_TO_SIGMA = 1.35
IDR_TO_SIGMA = 2.56

# Passive-period detection
PASSIVE_SAMPLES = 38
PASSIVE_THRESHOLD_DB = 25.0

# Network input
INPUT_WIDTH = 128
INPUT_HEIGHT = 512
MISSING_FILL_VALUE = -3.0
N_PLANES = 10

# Augmentation
STRETCH_RANGE = (0.5, 2.0)
CROP_BRANCH_PROBABILITIES = (0.1, 0.1, 0.4, 0.4)
CROP_NEAR_OPTIMAL_SPREAD = 0.25
CROP_MAX_AIR_REMOVED = 0.25
CROP_MAX_SEAFLOOR_REMOVED = 0.5
BRIGHTNESS_RANGE = (-0.5, 0.5)
CONTRAST_RANGE = (0.7, 1.3)
ELASTIC_SIGMA_TIME = 8.0
ELASTIC_SIGMA_DEPTH = 16.0
ELASTIC_ALPHA = 0.1
REFLECT_PROBABILITY = 0.5
ELASTIC_PROBABILITY = 0.5

# Inference
AUTOZOOM_THRESHOLD = 0.35
ZOOM_MARGIN_M = 2.0
ZOOM_SPREAD_SIGMAS = 4.0
REGION_MERGE_GAP_PINGS = 10
REGION_MIN_LENGTH_PINGS = 10
PATCH_MIN_AREA_PING_METRES = 25.0
LINE_OFFSET_M = 1.0
NEARFIELD_M = 1.7

# Baselines
BLUR_KERNEL = 13
BLUR_SIGMA = 2.0
THRESHOLD_OFFSET_MIN_DB = -80.0
INVERT_GAIN = -1.0
INVERT_OFFSET = -150.0
GOOD_PICK_DB = -70.0
DISCRIMINATION_DB = -70.0
BACKSTEP_DB = -50.0
SURFACE_BACKSTEP_DB = -25.0
SEAFLOOR_BOTTOM_OFFSET_M = 0.5
GOOD_PICK_RUN = 3
LAYER_MEDIAN_DB = -40.0

# Evaluation
ERROR_THRESHOLDS_M = (0.5, 1.0, 2.0)
CDF_MAX_M = 5.0
CDF_STEP_M = 0.05
