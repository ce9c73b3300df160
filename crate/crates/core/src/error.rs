use thiserror::Error;

/// Failure modes shared by every numerical module.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum GnError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("no admissible turning point: {0}")]
    NoTurningPoint(String),
    #[error("integration failure: {0}")]
    IntegrationFailure(String),
    #[error("level-set violation at x={x}: {detail}")]
    LevelSetViolation { x: f64, detail: String },
    #[error("tail underflow")]
    TailUnderflow,
    #[error("Jordan residual too large: {name} = {value:e}")]
    JordanResidual { name: &'static str, value: f64 },
    #[error("degenerate projector: dQ/domega = {0:e}")]
    DegenerateProjector(f64),
    #[error("threshold degeneracy: |xi_{index}| = {value:e}")]
    ThresholdDegeneracy { index: usize, value: f64 },
    #[error("stiff blow-up near x={0}")]
    StiffBlowUp(f64),
    #[error("basis degenerate: condition number {0:e}")]
    BasisDegenerate(f64),
    #[error("not a zero: |E| = {0:e}")]
    NotAZero(f64),
    #[error("ambiguous parity: |E_X| = {ex:e}, |E_Xperp| = {exp:e}")]
    AmbiguousParity { ex: f64, exp: f64 },
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("lost zero after omega = {0}")]
    LostZero(f64),
    #[error("null signature: {0:e}")]
    NullSignature(f64),
    #[error("degenerate B row")]
    DegenerateBRow,
    #[error("Evans zero, resolvent undefined: |E| = {0:e}")]
    EvansZero(f64),
    #[error("parity violation: {0}")]
    ParityViolation(String),
    #[error("left soliton tube: {0}")]
    LeftTube(String),
    #[error("modulation matrix degenerate: cond = {0:e}")]
    ModulationDegenerate(f64),
    #[error("overflow at t = {0}")]
    Overflow(f64),
    #[error("no artifact observed before t = {0}")]
    NoArtifact(f64),
}

pub type Result<T> = std::result::Result<T, GnError>;
