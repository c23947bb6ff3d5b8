//! Closed-form resource counts and the parallel / linear / tree comparison.

use std::fmt;
use std::fmt::Write as _;

use thiserror::Error;

use crate::network::{RootedTree, TreeProfile};
use crate::protocol::ProtocolKind;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ResourceError {
    #[error("resource counts need at least two parties, got {0}")]
    TooFewParties(usize),
}

/// `Σ_{d=1}^{h} n_d (d+1)`: each Hadamard outcome at depth `d` reaches the
/// whole subtree below it, on top of one upward bit per edge.
pub fn cbits_ch(profile: &TreeProfile) -> usize {
    (1..=profile.height)
        .map(|d| profile.count_at(d) * (d + 1))
        .sum()
}

/// Two bits per edge whatever the shape.
pub fn cbits_cu(profile: &TreeProfile) -> usize {
    2 * (1..=profile.height)
        .map(|d| profile.count_at(d))
        .sum::<usize>()
}

pub fn cbits(kind: ProtocolKind, profile: &TreeProfile) -> usize {
    match kind {
        ProtocolKind::Ch => cbits_ch(profile),
        ProtocolKind::Cu => cbits_cu(profile),
    }
}

pub fn steps(kind: ProtocolKind, profile: &TreeProfile) -> usize {
    let h = profile.height;
    match kind {
        ProtocolKind::Ch => 3 * h + 4,
        ProtocolKind::Cu => 6 * h + 1,
    }
}

pub fn ebits(profile: &TreeProfile) -> usize {
    profile.n() - 1
}

/// Closed forms for the two extreme networks on `n` parties.
pub mod closed_form {
    use crate::protocol::ProtocolKind;

    pub fn parallel_cbits(_kind: ProtocolKind, n: usize) -> usize {
        2 * (n - 1)
    }

    pub fn parallel_steps(_kind: ProtocolKind) -> usize {
        7
    }

    pub fn linear_cbits(kind: ProtocolKind, n: usize) -> usize {
        match kind {
            ProtocolKind::Ch => (n * n + n - 2) / 2,
            ProtocolKind::Cu => 2 * (n - 1),
        }
    }

    pub fn linear_steps(kind: ProtocolKind, n: usize) -> usize {
        match kind {
            ProtocolKind::Ch => 3 * n + 1,
            ProtocolKind::Cu => 6 * n - 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Network {
    Parallel,
    Linear,
    Tree,
}

impl fmt::Display for Network {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Network::Parallel => "parallel",
            Network::Linear => "linear",
            Network::Tree => "tree",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResourceRow {
    pub network: Network,
    pub height: usize,
    pub ebits: usize,
    pub cbits: usize,
    pub steps: usize,
    pub max_bell_pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResourceReport {
    pub kind: ProtocolKind,
    pub profile: TreeProfile,
    pub rows: Vec<ResourceRow>,
}

impl ResourceReport {
    pub fn row(&self, network: Network) -> &ResourceRow {
        self.rows
            .iter()
            .find(|r| r.network == network)
            .expect("report has one row per network")
    }

    pub fn to_text(&self) -> String {
        let counts: Vec<String> = (1..=self.profile.height)
            .map(|d| format!("n_{d}={}", self.profile.count_at(d)))
            .collect();
        let mut out = format!(
            "kind={} n={} h={} {}\n",
            self.kind,
            self.profile.n(),
            self.profile.height,
            counts.join(" ")
        );
        let _ = writeln!(
            out,
            "{:<10} {:>6} {:>6} {:>6} {:>6} {:>10}",
            "network", "h", "ebits", "cbits", "steps", "max_pairs"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<10} {:>6} {:>6} {:>6} {:>6} {:>10}",
                r.network.to_string(),
                r.height,
                r.ebits,
                r.cbits,
                r.steps,
                r.max_bell_pairs
            );
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,network,n,h,ebits,cbits,steps,max_bell_pairs\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                self.kind,
                r.network,
                self.profile.n(),
                r.height,
                r.ebits,
                r.cbits,
                r.steps,
                r.max_bell_pairs
            );
        }
        out
    }
}

fn row(network: Network, kind: ProtocolKind, tree: &RootedTree) -> ResourceRow {
    let profile = tree.profile();
    ResourceRow {
        network,
        height: profile.height,
        ebits: ebits(&profile),
        cbits: cbits(kind, &profile),
        steps: steps(kind, &profile),
        max_bell_pairs: tree.max_bell_pairs_per_party(),
    }
}

/// Evaluates the general counts on the star and the path with the same
/// number of parties as `tree`, and on `tree` itself.
pub fn comparison_report(
    kind: ProtocolKind,
    tree: &RootedTree,
) -> Result<ResourceReport, ResourceError> {
    let n = tree.len();
    if n < 2 {
        return Err(ResourceError::TooFewParties(n));
    }
    Ok(ResourceReport {
        kind,
        profile: tree.profile(),
        rows: vec![
            row(Network::Parallel, kind, &RootedTree::star(n)),
            row(Network::Linear, kind, &RootedTree::path(n)),
            row(Network::Tree, kind, tree),
        ],
    })
}
