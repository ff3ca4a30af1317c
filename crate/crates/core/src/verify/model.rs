//! Reading selections back out of solver models.

use std::collections::HashMap;

use crate::abstraction::AbstractConfig;
use crate::error::{Error, Result};

use super::evaluate::Evaluator;
use super::problem::{ToleranceMode, VerificationProblem};
use super::sexpr::{parse_all, SExpr};

/// Integer definitions from a `(get-model)` response.
fn model_ints(model_text: &str) -> Result<HashMap<String, i64>> {
    let exprs = parse_all(model_text)?;
    let mut defs = Vec::new();
    for e in &exprs {
        match e.as_list() {
            Some(items) if items.first().and_then(SExpr::as_atom) == Some("model") => defs.extend(&items[1..]),
            Some(items) if items.first().and_then(SExpr::as_atom) == Some("define-fun") => defs.push(e),
            Some(items) => defs.extend(items),
            None => return Err(Error::Parse(format!("unexpected token in model: {e:?}"))),
        }
    }
    let mut out = HashMap::new();
    for d in defs {
        let Some(items) = d.as_list() else {
            return Err(Error::Parse("model entry is not a list".into()));
        };
        match items {
            [SExpr::Atom(kw), SExpr::Atom(name), SExpr::List(args), SExpr::Atom(sort), value]
                if kw == "define-fun" && args.is_empty() && sort == "Int" =>
            {
                let v = value
                    .as_int()
                    .ok_or_else(|| Error::Parse(format!("non-literal value for {name}")))?;
                out.insert(name.clone(), v);
            }
            [SExpr::Atom(kw), ..] if kw == "define-fun" => {}
            _ => return Err(Error::Parse(format!("unrecognized model entry: {d:?}"))),
        }
    }
    Ok(out)
}

fn index(values: &HashMap<String, i64>, name: &str) -> Result<usize> {
    let v = *values
        .get(name)
        .ok_or_else(|| Error::Parse(format!("model has no value for {name}")))?;
    usize::try_from(v).map_err(|_| Error::ModelValidation(format!("{name} = {v} is negative")))
}

/// Extracts the selections from a model, then re-simulates exactly and
/// rejects anything that does not satisfy the spec at `mode`.
pub fn parse_model(model_text: &str, problem: &VerificationProblem, mode: ToleranceMode) -> Result<AbstractConfig> {
    let n = problem.agents();
    let flat = model_selections(model_text, n)?;
    validate_assignment(&flat, n, problem, mode)
}

/// `init_0 .. init_{n-1}` followed by `lam_0 .. lam_{n-1}` from a model.
pub(crate) fn model_selections(model_text: &str, n: usize) -> Result<Vec<i64>> {
    let values = model_ints(model_text)?;
    let mut flat = Vec::with_capacity(2 * n);
    for prefix in ["init", "lam"] {
        for i in 0..n {
            flat.push(index(&values, &format!("{prefix}_{i}"))? as i64);
        }
    }
    Ok(flat)
}

/// Values from a `(get-value (...))` response, in the order of `names`.
pub fn parse_assignment(text: &str, names: &[String]) -> Result<Vec<i64>> {
    let exprs = parse_all(text)?;
    let [SExpr::List(pairs)] = exprs.as_slice() else {
        return Err(Error::Parse(format!("malformed get-value response: {text}")));
    };
    let mut values = HashMap::new();
    for p in pairs {
        match p.as_list() {
            Some([SExpr::Atom(name), value]) => {
                let v = value
                    .as_int()
                    .ok_or_else(|| Error::Parse(format!("non-integer value for {name}")))?;
                values.insert(name.clone(), v);
            }
            _ => return Err(Error::Parse(format!("malformed get-value pair: {p:?}"))),
        }
    }
    names
        .iter()
        .map(|n| {
            values
                .get(n)
                .copied()
                .ok_or_else(|| Error::Parse(format!("get-value response lacks {n}")))
        })
        .collect()
}

/// Validation gate: `values` holds `n` init indices followed by `n` levels.
pub(crate) fn validate_assignment(
    values: &[i64],
    n: usize,
    problem: &VerificationProblem,
    mode: ToleranceMode,
) -> Result<AbstractConfig> {
    if values.len() != 2 * n {
        return Err(Error::ModelValidation(format!(
            "expected {} selections, got {}",
            2 * n,
            values.len()
        )));
    }
    let to_index = |v: i64| {
        usize::try_from(v).map_err(|_| Error::ModelValidation(format!("negative selection {v}")))
    };
    let config = AbstractConfig {
        init_indices: values[..n].iter().map(|&v| to_index(v)).collect::<Result<_>>()?,
        lambda_levels: values[n..].iter().map(|&v| to_index(v)).collect::<Result<_>>()?,
    };
    if !problem.contains(&config) {
        return Err(Error::ModelValidation(format!(
            "model selects a configuration outside the search space: {config:?}"
        )));
    }
    let outputs = Evaluator::new(problem).exact_outputs(&config)?;
    if !problem.spec_for(mode).satisfies_outputs(&outputs)? {
        return Err(Error::ModelValidation(format!(
            "model configuration {config:?} fails exact re-simulation at {mode}"
        )));
    }
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_both_model_layouts() {
        let plain = "((define-fun init_0 () Int 1) (define-fun x_0_0 () Real (/ 3.0 4.0)) (define-fun lam_0 () Int (- 2)))";
        let wrapped = "(model (define-fun init_0 () Int 1) (define-fun lam_0 () Int (- 2)))";
        for text in [plain, wrapped] {
            let v = model_ints(text).unwrap();
            assert_eq!(v["init_0"], 1);
            assert_eq!(v["lam_0"], -2);
        }
    }

    #[test]
    fn get_value_pairs_in_requested_order() {
        let names = vec!["lam_0".to_string(), "init_0".to_string()];
        let v = parse_assignment("((init_0 1) (lam_0 (- 3)))", &names).unwrap();
        assert_eq!(v, vec![-3, 1]);
        assert!(parse_assignment("((init_0 1))", &names).is_err());
        assert!(parse_assignment("((init_0 1)", &names).is_err());
    }
}
