use nalgebra::DMatrix;

/// Time-indexed matrices of a discrete linear time-varying system
///
/// ```text
/// x_{k+1} = F_k x_k + G_k u_k + w_k
/// y_k     = H_k x_k + v_k
/// ```
///
/// Implementations must return `n × n`, `n × q` and `p × n` matrices for every `k`.
pub trait LtvSystem: Sync {
    fn state_dim(&self) -> usize;
    fn meas_dim(&self) -> usize;
    fn input_dim(&self) -> usize;

    fn f(&self, k: usize) -> DMatrix<f64>;
    fn g(&self, k: usize) -> DMatrix<f64>;
    fn h(&self, k: usize) -> DMatrix<f64>;
}

/// A time-invariant system; mostly useful for tests and small examples.
#[derive(Clone, Debug)]
pub struct LtiSystem {
    pub f: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub h: DMatrix<f64>,
}

impl LtiSystem {
    pub fn new(f: DMatrix<f64>, g: DMatrix<f64>, h: DMatrix<f64>) -> Self {
        assert!(f.is_square(), "F must be square");
        assert_eq!(g.nrows(), f.nrows(), "G rows must match state dimension");
        assert_eq!(h.ncols(), f.nrows(), "H columns must match state dimension");
        Self { f, g, h }
    }
}

impl LtvSystem for LtiSystem {
    fn state_dim(&self) -> usize {
        self.f.nrows()
    }
    fn meas_dim(&self) -> usize {
        self.h.nrows()
    }
    fn input_dim(&self) -> usize {
        self.g.ncols()
    }
    fn f(&self, _k: usize) -> DMatrix<f64> {
        self.f.clone()
    }
    fn g(&self, _k: usize) -> DMatrix<f64> {
        self.g.clone()
    }
    fn h(&self, _k: usize) -> DMatrix<f64> {
        self.h.clone()
    }
}

/// Closure-backed time-varying system.
pub struct FnSystem<F, G, H> {
    pub dims: (usize, usize, usize),
    pub f: F,
    pub g: G,
    pub h: H,
}

impl<F, G, H> LtvSystem for FnSystem<F, G, H>
where
    F: Fn(usize) -> DMatrix<f64> + Sync,
    G: Fn(usize) -> DMatrix<f64> + Sync,
    H: Fn(usize) -> DMatrix<f64> + Sync,
{
    fn state_dim(&self) -> usize {
        self.dims.0
    }
    fn meas_dim(&self) -> usize {
        self.dims.1
    }
    fn input_dim(&self) -> usize {
        self.dims.2
    }
    fn f(&self, k: usize) -> DMatrix<f64> {
        (self.f)(k)
    }
    fn g(&self, k: usize) -> DMatrix<f64> {
        (self.g)(k)
    }
    fn h(&self, k: usize) -> DMatrix<f64> {
        (self.h)(k)
    }
}
