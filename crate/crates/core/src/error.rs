use crate::chordal::ChordalError;
use crate::cone::ConeError;
use crate::converter::ConvertError;
use crate::ipm::IpmError;
use crate::linalg::LinalgError;
use crate::normal::NormalError;
use crate::problem::ProblemError;
use crate::recovery::RecoveryError;
use crate::sdpa::SdpaError;
use crate::splitter::SplitError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Chordal(#[from] ChordalError),
    #[error(transparent)]
    Split(#[from] SplitError),
    #[error(transparent)]
    Convert(#[from] ConvertError),
    #[error(transparent)]
    Cone(#[from] ConeError),
    #[error(transparent)]
    Normal(#[from] NormalError),
    #[error(transparent)]
    Ipm(#[from] IpmError),
    #[error(transparent)]
    Recovery(#[from] RecoveryError),
    #[error(transparent)]
    Sdpa(#[from] SdpaError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
