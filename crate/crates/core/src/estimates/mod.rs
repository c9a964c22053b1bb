//! Norm monitors and numerical witnesses of the a priori estimates.

mod apriori;
mod bihari;
mod dependence;
mod holder;
mod ledger;
mod norms;
mod three_d;
mod weak;

pub use apriori::{apriori_monitor, AprioriReport};
pub use bihari::{adaptive_simpson, bihari_general, bihari_tstar};
pub use dependence::{continuous_dependence, dependence_sweep, rotate, DependenceReport};
pub use holder::{holder_quotient, HolderNorm, HolderReport, MIN_SNAPSHOTS};
pub use ledger::{
    convergence_order, energy_balance_residual, h1_balance_residual, max_abs, EnergyLedger, LedgerMonitor,
    LEDGER_HEADER,
};
pub use norms::{norms, NormEvaluator, NormSuite};
pub use three_d::{square_identity, three_d_energy_identity, SquareIdentity};
pub use weak::weak_residual;
