//! Line-oriented text format for reaction networks.
//!
//! ```text
//! # comment
//! species: P, P2
//! 2 P -> P2 @ 0.00166
//! P2 -> 2 P @ 0.2
//! init: P=301
//! ```

use super::{NetworkError, Reaction, ReactionNetwork, StateVector};

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    /// Accept reactions whose change vector is zero.
    pub allow_noop: bool,
}

pub fn parse_network(text: &str) -> Result<ReactionNetwork, NetworkError> {
    parse_network_with(text, ParseOptions::default())
}

struct RawReaction {
    line: usize,
    lhs: Vec<(String, u32)>,
    rhs: Vec<(String, u32)>,
    rate: f64,
}

pub fn parse_network_with(
    text: &str,
    opts: ParseOptions,
) -> Result<ReactionNetwork, NetworkError> {
    let mut names: Vec<String> = Vec::new();
    let mut header_fixed = false;
    let mut raw: Vec<RawReaction> = Vec::new();
    let mut init: Vec<(usize, String, u32)> = Vec::new();

    for (k, line) in text.lines().enumerate() {
        let lineno = k + 1;
        let line = line.trim_end_matches('\r');
        let line = match line.find('#') {
            Some(p) => &line[..p],
            None => line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("species:") {
            if header_fixed || !raw.is_empty() {
                return Err(syntax(lineno, "species header must appear once, before reactions"));
            }
            header_fixed = true;
            for name in rest.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                check_identifier(lineno, name)?;
                if names.iter().any(|n| n == name) {
                    return Err(NetworkError::DuplicateSpecies {
                        line: lineno,
                        name: name.to_string(),
                    });
                }
                names.push(name.to_string());
            }
            continue;
        }
        if let Some(rest) = line.strip_prefix("init:") {
            for item in rest.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                let (name, count) = item
                    .split_once('=')
                    .ok_or_else(|| syntax(lineno, &format!("expected `Name=count`, got `{item}`")))?;
                let name = name.trim();
                let count = count.trim();
                let value = parse_count(lineno, count)?;
                init.push((lineno, name.to_string(), value));
            }
            continue;
        }
        raw.push(parse_reaction(lineno, line)?);
    }

    // Auto-index species in first-appearance order when no header is given.
    for r in &raw {
        for (name, _) in r.lhs.iter().chain(&r.rhs) {
            if !names.iter().any(|n| n == name) {
                if header_fixed {
                    return Err(NetworkError::UnknownSpecies {
                        line: r.line,
                        name: name.clone(),
                    });
                }
                names.push(name.clone());
            }
        }
    }

    let n = names.len();
    let index_of = |name: &str| names.iter().position(|x| x == name);
    let mut reactions = Vec::with_capacity(raw.len());
    for r in &raw {
        let mut reactants = vec![0u32; n];
        let mut products = vec![0u32; n];
        for (name, c) in &r.lhs {
            reactants[index_of(name).expect("indexed above")] += c;
        }
        for (name, c) in &r.rhs {
            products[index_of(name).expect("indexed above")] += c;
        }
        let order: u32 = reactants.iter().sum();
        if order > 2 {
            return Err(NetworkError::Trimolecular { line: r.line });
        }
        if !opts.allow_noop && reactants == products {
            return Err(syntax(r.line, "reaction leaves every population unchanged"));
        }
        reactions.push(Reaction::new(reactants, products, r.rate));
    }

    let mut x0 = vec![0u32; n];
    for (line, name, value) in init {
        let i = index_of(&name).ok_or(NetworkError::UnknownSpecies { line, name })?;
        x0[i] = value;
    }
    ReactionNetwork::build(names, reactions, StateVector(x0), opts.allow_noop)
}

fn parse_reaction(line: usize, text: &str) -> Result<RawReaction, NetworkError> {
    let (body, rate) = match text.split_once('@') {
        Some((b, r)) => (b, r.trim()),
        None => return Err(NetworkError::MissingRate { line }),
    };
    if rate.is_empty() {
        return Err(NetworkError::MissingRate { line });
    }
    let rate: f64 = rate
        .parse()
        .map_err(|_| syntax(line, &format!("invalid rate constant `{rate}`")))?;
    if !(rate.is_finite() && rate > 0.0) {
        return Err(syntax(line, &format!("rate constant must be positive, got {rate}")));
    }
    let (lhs, rhs) = body
        .split_once("->")
        .ok_or_else(|| syntax(line, "expected `->`"))?;
    Ok(RawReaction {
        line,
        lhs: parse_side(line, lhs)?,
        rhs: parse_side(line, rhs)?,
        rate,
    })
}

fn parse_side(line: usize, side: &str) -> Result<Vec<(String, u32)>, NetworkError> {
    let side = side.trim();
    if side == "0" || side.is_empty() {
        if side.is_empty() {
            return Err(syntax(line, "empty reaction side, write `0` for no molecules"));
        }
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for term in side.split('+') {
        let term = term.trim();
        let tokens: Vec<&str> = term.split_whitespace().collect();
        let (coeff, name) = match tokens.as_slice() {
            [name] => split_glued(line, name)?,
            [c, name] => (parse_coefficient(line, c)?, name.to_string()),
            [] => return Err(syntax(line, "empty term")),
            _ => return Err(syntax(line, &format!("cannot parse term `{term}`"))),
        };
        check_identifier(line, &name)?;
        if coeff > 0 {
            out.push((name, coeff));
        }
    }
    Ok(out)
}

/// Splits `2P` into coefficient and name; a bare name has coefficient 1.
fn split_glued(line: usize, token: &str) -> Result<(u32, String), NetworkError> {
    let digits = token.chars().take_while(|c| c.is_ascii_digit()).count();
    if digits == 0 {
        if token.starts_with('-') || token.starts_with('.') {
            return Err(NetworkError::InvalidCoefficient {
                line,
                token: token.to_string(),
            });
        }
        return Ok((1, token.to_string()));
    }
    let (c, name) = token.split_at(digits);
    if name.is_empty() || name.starts_with('.') {
        return Err(NetworkError::InvalidCoefficient {
            line,
            token: token.to_string(),
        });
    }
    Ok((parse_coefficient(line, c)?, name.to_string()))
}

fn parse_coefficient(line: usize, token: &str) -> Result<u32, NetworkError> {
    if !token.chars().all(|c| c.is_ascii_digit()) || token.is_empty() {
        return Err(NetworkError::InvalidCoefficient {
            line,
            token: token.to_string(),
        });
    }
    token.parse().map_err(|_| NetworkError::InvalidCoefficient {
        line,
        token: token.to_string(),
    })
}

fn parse_count(line: usize, token: &str) -> Result<u32, NetworkError> {
    parse_coefficient(line, token)
}

fn check_identifier(line: usize, name: &str) -> Result<(), NetworkError> {
    let mut chars = name.chars();
    let ok_first = chars
        .next()
        .map(|c| c.is_alphabetic() || c == '_')
        .unwrap_or(false);
    if ok_first && chars.all(|c| c.is_alphanumeric() || c == '_' || c == '.') {
        Ok(())
    } else {
        Err(syntax(line, &format!("invalid species name `{name}`")))
    }
}

fn syntax(line: usize, message: &str) -> NetworkError {
    NetworkError::Syntax {
        line,
        message: message.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_dimerization() {
        let net = parse_network("2 P -> P2 @ 0.00166 \n P2 -> 2 P @ 0.2 \n init: P=301").unwrap();
        assert_eq!(net.species_names(), vec!["P", "P2"]);
        assert_eq!(net.reactions()[0].reactants, vec![2, 0]);
        assert_eq!(net.reactions()[0].products, vec![0, 1]);
        assert_eq!(net.reactions()[1].products, vec![2, 0]);
        assert_eq!(net.initial_state().counts(), &[301, 0]);
    }

    #[test]
    fn birth_process_has_empty_reactant_side() {
        let net = parse_network("0 -> A @ 5.0 \n init: A=0").unwrap();
        assert_eq!(net.reactions()[0].reactants, vec![0]);
        assert_eq!(net.change_vector(0), vec![1]);
    }

    #[test]
    fn rejects_trimolecular() {
        let err = parse_network("3 A -> B @ 1.0").unwrap_err();
        assert_eq!(err, NetworkError::Trimolecular { line: 1 });
        assert!(err.to_string().contains("trimolecular reaction not supported"));
        assert!(matches!(
            parse_network("A + A + B -> C @ 1"),
            Err(NetworkError::Trimolecular { .. })
        ));
    }

    #[test]
    fn error_paths_carry_line_numbers() {
        assert_eq!(
            parse_network("A -> B @ 1\nB -> A").unwrap_err(),
            NetworkError::MissingRate { line: 2 }
        );
        assert!(matches!(
            parse_network("species: A, B, A\nA -> B @ 1"),
            Err(NetworkError::DuplicateSpecies { line: 1, .. })
        ));
        assert!(matches!(
            parse_network("A -> B @ 1\ninit: C=3"),
            Err(NetworkError::UnknownSpecies { line: 2, .. })
        ));
        assert!(matches!(
            parse_network("1.5 A -> B @ 1"),
            Err(NetworkError::InvalidCoefficient { line: 1, .. })
        ));
        assert!(matches!(
            parse_network("-1 A -> B @ 1"),
            Err(NetworkError::InvalidCoefficient { line: 1, .. })
        ));
        assert!(matches!(
            parse_network("A -> @ 1"),
            Err(NetworkError::Syntax { line: 1, .. })
        ));
        assert!(parse_network("A B -> C @ 1").is_err());
        assert!(matches!(
            parse_network("species: A\nA -> B @ 1"),
            Err(NetworkError::UnknownSpecies { line: 2, .. })
        ));
    }

    #[test]
    fn header_fixes_order_and_comments_are_ignored() {
        let text = "# switch\r\nspecies: B, A\r\nA -> B @ 2 # forward\r\nB -> A @ 1\r\ninit: A=4\r\n";
        let net = parse_network(text).unwrap();
        assert_eq!(net.species_names(), vec!["B", "A"]);
        assert_eq!(net.initial_state().counts(), &[0, 4]);
    }

    #[test]
    fn glued_coefficients_and_repeated_species() {
        let a = parse_network("2P -> P2 @ 1").unwrap();
        let b = parse_network("P + P -> P2 @ 1").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn noop_only_with_option() {
        assert!(parse_network("A -> A @ 1").is_err());
        let net = parse_network_with("A -> A @ 1", ParseOptions { allow_noop: true }).unwrap();
        assert_eq!(net.change_vector(0), vec![0]);
    }

    #[test]
    fn pretty_print_round_trips_builtins() {
        for name in super::super::builtin_names() {
            let net = super::super::builtin_model(name).unwrap();
            let text = net.to_string();
            assert_eq!(parse_network(&text).unwrap(), net, "{name}");
        }
    }
}
