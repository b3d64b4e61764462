//! Variance-reduced stochastic optimization with least-squares control
//! variates, together with SGD/Adam/SAGA/full-gradient baselines and two
//! PDE-constrained test problems on the unit square.

pub mod bench;
pub mod checks;
pub mod fem;
pub mod leastsq;
pub mod optim;
pub mod polybasis;
pub mod problems;
pub mod sampling;
