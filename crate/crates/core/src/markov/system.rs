use crate::model::{Params, SystemState};

/// Row-stochastic transition matrix of (C, B) over the states
/// `[(0,0), (0,1), (1,0)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemChain {
    pub matrix: [[f64; 3]; 3],
}

impl SystemChain {
    pub fn prob(&self, from: SystemState, to: SystemState) -> f64 {
        self.matrix[from.index()][to.index()]
    }
}

pub fn build_system_chain(p: &Params) -> SystemChain {
    let (l1, l2) = (p.lambda1(), p.lambda2());
    let (n1, n2) = (p.lambda1_bar(), p.lambda2_bar());
    SystemChain {
        matrix: [
            [l1 * l2 + n1 * n2, n1 * l2, l1 * n2],
            [l1 * n2, l2 + n1 * n2, 0.0],
            [l2, 0.0, n2],
        ],
    }
}
