"""Connected clustering solvers."""
