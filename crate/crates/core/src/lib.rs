pub mod applied;
pub mod elliptic;
pub mod energetics;
pub mod grid;
pub mod reduced;
pub mod scalar;
pub mod snapshot;
pub mod sparse;
pub mod spline;
pub mod tdgl;
pub mod vortex;

pub use scalar::{Real, C};

/// Double-precision aliases for the common case.
pub mod f64 {
    pub type Grid = crate::grid::DomainGrid<f64>;
    pub type NodeField = crate::grid::NodeField<f64>;
    pub type EdgeField = crate::grid::EdgeField<f64>;
    pub type CellField = crate::grid::CellField<f64>;
    pub type Complex = crate::scalar::C<f64>;
    pub type State = crate::tdgl::State<f64>;
    pub type Fields = crate::applied::PrecomputedFields<f64>;
    pub type Drive = crate::applied::DriveSpec<f64>;
    pub type StepperConfig = crate::tdgl::StepperConfig<f64>;
    pub type Stepper = crate::tdgl::Stepper<f64>;
    pub type ReducedState = crate::reduced::ReducedState<f64>;
    pub type Trajectory = crate::reduced::Trajectory<f64>;
}
