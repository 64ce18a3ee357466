//! Transmit pattern construction for multi-branch precoding.
//!
//! A transmit pattern is an S x S row permutation built in two stages:
//! inter-user orderings shuffle whole antenna blocks between users, and
//! intra-user orderings shuffle the streams inside each block. Streams of one
//! user are never split across users, which is what makes the scheme workable
//! for physically distributed receivers. Branch 1 is always the identity, so
//! a multi-branch search can never do worse than the unordered precoder.

use crate::channel::SystemGeometry;
use crate::matkit::Permutation;

/// One branch: the permutation plus its (user-order, stream-order) provenance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransmitPattern {
    pub perm: Permutation,
    /// Inter-user ordering state i (1-based).
    pub user_state: usize,
    /// Per-user stream ordering states, clamped to each user's antenna count.
    pub stream_states: Vec<usize>,
    /// Branch index l (1-based); branch 1 is the identity.
    pub branch_index: usize,
}

impl TransmitPattern {
    pub fn identity(geometry: &SystemGeometry) -> Self {
        Self {
            perm: Permutation::identity(geometry.num_streams()),
            user_state: 1,
            stream_states: vec![1; geometry.num_users()],
            branch_index: 1,
        }
    }

    /// One-line dump used by the pattern pre-storage interface:
    /// `l,i,(j_1,...,j_K),p0 p1 ...`.
    pub fn dump_line(&self) -> String {
        let states: Vec<String> = self.stream_states.iter().map(|j| j.to_string()).collect();
        let perm: Vec<String> = self.perm.order().iter().map(|p| p.to_string()).collect();
        format!(
            "{},{},({}),{}",
            self.branch_index,
            self.user_state,
            states.join(","),
            perm.join(" ")
        )
    }
}

// Block permutation diag(I_p, Pi_{n-p}) as an index vector.
fn block_exchange(n: usize, p: usize) -> Permutation {
    let mut order: Vec<usize> = (0..p).collect();
    order.extend((p..n).rev());
    Permutation::new(order).expect("constructed bijection")
}

/// Inter-user ordering states: identity first, then block exchanges with a
/// growing fixed prefix. Returns K permutations of size K.
pub fn user_orderings(num_users: usize) -> Vec<Permutation> {
    (1..=num_users)
        .map(|i| {
            if i == 1 {
                Permutation::identity(num_users)
            } else {
                block_exchange(num_users, i - 2)
            }
        })
        .collect()
}

/// Intra-user ordering states for a user with `antennas` streams, capped at
/// `max_states`. Same construction as [`user_orderings`] at stream scale;
/// users with fewer antennas than the cap simply expose fewer states.
pub fn stream_orderings(antennas: usize, max_states: usize) -> Vec<Permutation> {
    (1..=antennas.min(max_states))
        .map(|j| {
            if j == 1 {
                Permutation::identity(antennas)
            } else {
                block_exchange(antennas, j - 2)
            }
        })
        .collect()
}

/// Builds the branch list for a geometry, capped at
/// `min(max_branches, K * J)` with `J = max_k(N_k)`.
///
/// State pairs are enumerated user-order first — (1,1), (2,1), ..., (K,1),
/// (1,2), ... — so branch 1 is the identity and a small branch cap spends
/// its budget on inter-user diversity, which is where the selection gain
/// comes from; the full cap still covers all K*J pairs. For each branch,
/// the stream-ordering block of the source user is placed at the nonzero
/// block position of the user ordering, preserving its sparse pattern;
/// when all users have the same antenna count this equals the Kronecker
/// product of the two orderings.
pub fn build_patterns(geometry: &SystemGeometry, max_branches: usize) -> Vec<TransmitPattern> {
    let k = geometry.num_users();
    let j_max = geometry.max_user_antennas();
    let users = user_orderings(k);
    let streams: Vec<Vec<Permutation>> = geometry
        .users()
        .iter()
        .map(|&n| stream_orderings(n, j_max))
        .collect();
    let offsets = geometry.user_offsets();
    let total = max_branches.min(k * j_max).max(1);

    let mut out = Vec::with_capacity(total);
    'outer: for j in 1..=j_max {
        for i in 1..=k {
            if out.len() == total {
                break 'outer;
            }
            let user_perm = &users[i - 1];
            let mut order = Vec::with_capacity(geometry.num_streams());
            let mut stream_states = vec![0usize; k];
            for block_row in 0..k {
                let source_user = user_perm.order()[block_row];
                let n_u = geometry.users()[source_user];
                let state = j.min(n_u); // reuse the last valid state
                stream_states[source_user] = state;
                let sigma = &streams[source_user][state - 1];
                for &b in sigma.order() {
                    order.push(offsets[source_user] + b);
                }
            }
            out.push(TransmitPattern {
                perm: Permutation::new(order).expect("valid by construction"),
                user_state: i,
                stream_states,
                branch_index: out.len() + 1,
            });
        }
    }
    out
}
