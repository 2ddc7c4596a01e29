use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("descriptor mismatch: {0}")]
    DescriptorMismatch(String),

    #[error("invalid descriptor: {0}")]
    InvalidDescriptor(String),

    #[error("element is not positive (min eigenvalue {min_eigenvalue:e}, hermitian residual {hermitian_residual:e})")]
    NotPositive {
        min_eigenvalue: f64,
        hermitian_residual: f64,
    },

    #[error("element is not normal: ||a*a - aa*|| = {residual:e} exceeds {threshold:e}")]
    NotNormal { residual: f64, threshold: f64 },

    #[error("schur decomposition did not converge on a {0}x{0} block")]
    NoConvergence(usize),

    #[error("unsupported control parameters: {0}")]
    Unsupported(String),

    #[error("cannot certify the approximate Wigner condition after {retries} halvings (worst residual/phi ratio {worst_ratio:e})")]
    CannotCertify { retries: usize, worst_ratio: f64 },

    #[error("no accumulation point: largest cluster has {best_size} element(s), need {required} (cluster_tol {cluster_tol:e})")]
    NoAccumulationPoint {
        best_size: usize,
        required: usize,
        cluster_tol: f64,
    },

    #[error("limit relation violated: {relation} residual {residual:e} exceeds {threshold:e}")]
    LimitRelation {
        relation: &'static str,
        residual: f64,
        threshold: f64,
    },

    #[error("scaled iterate overflow at n = {n} (norm {norm:e})")]
    Overflow { n: usize, norm: f64 },

    #[error("target algebra is not abelian (block sizes {0:?})")]
    NotAbelian(Vec<usize>),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
