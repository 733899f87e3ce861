# restake-lab: core library
# Slashing mechanisms, Sybil analysis and random restaking networks.
