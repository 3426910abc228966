"""In-trajectory IRL with meta-regularization on finite MDPs."""
