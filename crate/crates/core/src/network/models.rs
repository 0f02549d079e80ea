//! Built-in benchmark networks.

use super::{parse_network, NetworkError, ReactionNetwork};

/// Default dimerization constants (c1 for `2 P -> P2`, c2 for `P2 -> 2 P`).
pub const DIMERIZATION_RATES: (f64, f64) = (0.00166, 0.2);

pub fn builtin_names() -> &'static [&'static str] {
    &["dimerization", "exclusive_switch", "multi_attractor"]
}

pub fn builtin_model(name: &str) -> Result<ReactionNetwork, NetworkError> {
    match name {
        "dimerization" => Ok(dimerization(DIMERIZATION_RATES.0, DIMERIZATION_RATES.1)),
        "exclusive_switch" => Ok(exclusive_switch()),
        "multi_attractor" => Ok(multi_attractor()),
        other => Err(NetworkError::UnknownModel(other.to_string())),
    }
}

/// `2 P <-> P2` starting from 301 monomers.
pub fn dimerization(c1: f64, c2: f64) -> ReactionNetwork {
    let text = format!(
        "species: P, P2\n2 P -> P2 @ {c1:?}\nP2 -> 2 P @ {c2:?}\ninit: P=301, P2=0\n"
    );
    parse_network(&text).expect("dimerization model is well formed")
}

/// Two genes sharing a promoter; whichever protein is bound represses the other.
pub fn exclusive_switch() -> ReactionNetwork {
    parse_network(
        "species: DNA, P1, P2, DNA.P1, DNA.P2
DNA -> DNA + P1 @ 2.0
DNA -> DNA + P2 @ 5.0
P1 -> 0 @ 0.005
P2 -> 0 @ 0.005
DNA + P1 -> DNA.P1 @ 0.005
DNA + P2 -> DNA.P2 @ 0.002
DNA.P1 -> DNA + P1 @ 0.02
DNA.P2 -> DNA + P2 @ 0.02
DNA.P1 -> DNA.P1 + P1 @ 2.0
DNA.P2 -> DNA.P2 + P2 @ 5.0
init: DNA=1
",
    )
    .expect("exclusive switch model is well formed")
}

/// Three-gene network with mutual activation and repression (13 species, 24 reactions).
pub fn multi_attractor() -> ReactionNetwork {
    multi_attractor_with(5.0, 0.1, 1.0, 1.0)
}

/// Multi-attractor model with production, degradation, binding and unbinding constants.
pub fn multi_attractor_with(cp: f64, cd: f64, cb: f64, cu: f64) -> ReactionNetwork {
    let text = format!(
        "species: MAFAProt, DeltaProt, PaxProt, PaxDna, MAFADna, DeltaDna, PaxDnaDeltaProt, \
MAFADnaPaxProt, MAFADnaMAFAProt, MAFADnaDeltaProt, DeltaDnaPaxProt, DeltaDnaMAFAProt, DeltaDnaDeltaProt
PaxDna -> PaxDna + PaxProt @ {cp:?}
PaxProt -> 0 @ {cd:?}
PaxDna + DeltaProt -> PaxDnaDeltaProt @ {cb:?}
PaxDnaDeltaProt -> PaxDna + DeltaProt @ {cu:?}
MAFADna -> MAFADna + MAFAProt @ {cp:?}
MAFAProt -> 0 @ {cd:?}
MAFADna + PaxProt -> MAFADnaPaxProt @ {cb:?}
MAFADnaPaxProt -> MAFADna + PaxProt @ {cu:?}
MAFADnaPaxProt -> MAFADnaPaxProt + MAFAProt @ {cp:?}
MAFADna + MAFAProt -> MAFADnaMAFAProt @ {cb:?}
MAFADnaMAFAProt -> MAFADna + MAFAProt @ {cu:?}
MAFADnaMAFAProt -> MAFADnaMAFAProt + MAFAProt @ {cp:?}
MAFADna + DeltaProt -> MAFADnaDeltaProt @ {cb:?}
MAFADnaDeltaProt -> MAFADna + DeltaProt @ {cu:?}
DeltaDna -> DeltaDna + DeltaProt @ {cp:?}
DeltaProt -> 0 @ {cd:?}
DeltaDna + PaxProt -> DeltaDnaPaxProt @ {cb:?}
DeltaDnaPaxProt -> DeltaDna + PaxProt @ {cu:?}
DeltaDnaPaxProt -> DeltaDnaPaxProt + DeltaProt @ {cp:?}
DeltaDna + MAFAProt -> DeltaDnaMAFAProt @ {cb:?}
DeltaDnaMAFAProt -> DeltaDna + MAFAProt @ {cu:?}
DeltaDna + DeltaProt -> DeltaDnaDeltaProt @ {cb:?}
DeltaDnaDeltaProt -> DeltaDna + DeltaProt @ {cu:?}
DeltaDnaDeltaProt -> DeltaDnaDeltaProt + DeltaProt @ {cp:?}
init: PaxDna=1, MAFADna=1, DeltaDna=1
"
    );
    parse_network(&text).expect("multi-attractor model is well formed")
}

/// Species groups whose total count is invariant under every reaction of a builtin model.
pub fn conservation_groups(name: &str) -> Vec<Vec<&'static str>> {
    match name {
        "exclusive_switch" => vec![vec!["DNA", "DNA.P1", "DNA.P2"]],
        "multi_attractor" => vec![
            vec!["PaxDna", "PaxDnaDeltaProt"],
            vec!["MAFADna", "MAFADnaPaxProt", "MAFADnaMAFAProt", "MAFADnaDeltaProt"],
            vec!["DeltaDna", "DeltaDnaPaxProt", "DeltaDnaMAFAProt", "DeltaDnaDeltaProt"],
        ],
        _ => Vec::new(),
    }
}
