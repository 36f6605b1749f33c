use serde::{Deserialize, Serialize};

use super::{CartpoleParams, Movement, PocmanParams, TaskParams, TaskSpec, Topology};
use crate::error::{config, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DomainKind {
    Cartpole27,
    Cartpole125,
    Pocman18,
}

impl DomainKind {
    pub fn tasks(self) -> Vec<TaskSpec> {
        match self {
            DomainKind::Cartpole27 => make_cartpole_domain(27).expect("supported size"),
            DomainKind::Cartpole125 => make_cartpole_domain(125).expect("supported size"),
            DomainKind::Pocman18 => make_pocman_domain(),
        }
    }

    pub fn n_tasks(self) -> usize {
        match self {
            DomainKind::Cartpole27 => 27,
            DomainKind::Cartpole125 => 125,
            DomainKind::Pocman18 => 18,
        }
    }

    pub fn is_pomdp(self) -> bool {
        self == DomainKind::Pocman18
    }
}

/// Cartesian product of cart mass, pole mass and pole length, in
/// lexicographic order (cart mass slowest).
pub fn make_cartpole_domain(grid_size: usize) -> Result<Vec<TaskSpec>> {
    let (cart, pole, length): (&[f64], &[f64], &[f64]) = match grid_size {
        27 => (&[0.5, 1.0, 2.0], &[0.05, 0.1, 0.2], &[0.5, 1.0, 2.0]),
        125 => (
            &[0.5, 0.75, 1.0, 1.5, 2.0],
            &[0.05, 0.075, 0.1, 0.15, 0.2],
            &[0.5, 0.75, 1.0, 1.5, 2.0],
        ),
        other => return config(format!("unsupported cart-pole grid size {other}")),
    };
    let mut tasks = Vec::with_capacity(grid_size);
    for &cart_mass in cart {
        for &pole_mass in pole {
            for &pole_length in length {
                tasks.push(TaskSpec {
                    index: tasks.len(),
                    params: TaskParams::Cartpole(CartpoleParams {
                        cart_mass,
                        pole_mass,
                        pole_length,
                    }),
                });
            }
        }
    }
    Ok(tasks)
}

/// The 18 (reward, movement, topology) combinations.
pub fn make_pocman_domain() -> Vec<TaskSpec> {
    let mut tasks = Vec::with_capacity(18);
    for reward in [-1i8, 1] {
        for movement in Movement::ALL {
            for topology in Topology::ALL {
                tasks.push(TaskSpec {
                    index: tasks.len(),
                    params: TaskParams::Pocman(PocmanParams {
                        reward,
                        movement,
                        topology,
                    }),
                });
            }
        }
    }
    tasks
}
