//! Online readout adaptation (recursive least squares), batch ridge
//! regression, and ridge pretraining of the readout on stationary data.

mod pretrain;
mod ridge;
mod rls;

pub use pretrain::{
    collect_rule_rollouts, noisy_rule_action, pretrain_readout, InputEncoding,
    RANDOM_ACTION_FRACTION,
};
pub use ridge::ridge_fit;
pub use rls::{PredictionRecord, RlsConfig, RlsReadout, RlsSnapshot, DENOMINATOR_EPS};
