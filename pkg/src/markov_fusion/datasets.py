"""Reference matrices used by the studies and the golden tests."""

import numpy as np

from .chain import Mode, TransitionCounts, validate_matrix

# 3-state truth with four exactly-equal pairs: p11 = p13 = p31 and p12 = p23.
SIMULATION_TRUTH = validate_matrix(
    [[0.4, 0.2, 0.4],
     [0.5, 0.3, 0.2],
     [0.4, 0.34, 0.26]],
    Mode.STRICT_ERGODIC,
)

# Counts from one length-50,000 realization of SIMULATION_TRUTH.
SIMULATION_COUNTS = TransitionCounts(np.array([
    [8508, 4277, 8583],
    [6823, 3985, 2684],
    [6038, 5230, 3871],
]))

# 3-state truth with p12 = p32, used for the MLE equality-detection check.
EQUALITY_DEMO_TRUTH = validate_matrix(
    [[0.4, 0.1, 0.5],
     [0.45, 0.3, 0.25],
     [0.2, 0.1, 0.7]],
    Mode.STRICT_ERGODIC,
)

# Dinucleotide transition counts of a length-10,000 ACGT sequence (rows/cols A, C, G, T).
ACGT_COUNTS = TransitionCounts(np.array([
    [896, 478, 625, 927],
    [665, 462, 218, 579],
    [645, 440, 466, 531],
    [720, 543, 774, 1030],
]))

# Printed three-decimal estimates for ACGT_COUNTS.
ACGT_MLE_PRINTED = np.array([
    [0.306, 0.163, 0.214, 0.317],
    [0.346, 0.240, 0.113, 0.301],
    [0.310, 0.211, 0.224, 0.255],
    [0.235, 0.177, 0.252, 0.336],
])
ACGT_NULL_FIT_PRINTED = np.array([
    [0.307, 0.164, 0.213, 0.317],
    [0.346, 0.240, 0.113, 0.301],
    [0.309, 0.213, 0.223, 0.255],
    [0.235, 0.177, 0.252, 0.336],
])
ACGT_MCALASSO_PRINTED = np.array([
    [0.307, 0.168, 0.218, 0.307],
    [0.330, 0.240, 0.124, 0.307],
    [0.307, 0.218, 0.229, 0.247],
    [0.239, 0.184, 0.247, 0.330],
])
ACGT_MCLASSO_PRINTED = np.array([
    [0.303, 0.169, 0.218, 0.311],
    [0.335, 0.244, 0.121, 0.300],
    [0.303, 0.217, 0.227, 0.253],
    [0.237, 0.182, 0.253, 0.329],
])

# Printed three-decimal estimates for SIMULATION_COUNTS.
SIMULATION_MCLASSO_PRINTED = np.array([
    [0.398, 0.2, 0.402],
    [0.505, 0.295, 0.199],
    [0.399, 0.345, 0.256],
])
SIMULATION_MCALASSO_PRINTED = np.array([
    [0.4, 0.201, 0.4],
    [0.504, 0.295, 0.201],
    [0.4, 0.345, 0.255],
])
