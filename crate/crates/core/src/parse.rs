//! Strategies from short text, as used on the command line and in config
//! files: `name[:key=value,...]`.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::GameError;
use crate::game::{
    BestResponse, BribeForSolo, BribeToSkip, Honest, IncludeNothing, PublisherStrategy, ValidatorStrategy, Withhold,
};
use crate::types::{Money, PublisherId};

fn bad(msg: impl Into<String>) -> GameError {
    GameError::Strategy(msg.into())
}

/// `p1`, `P1` or `1`.
pub fn publisher_label(label: &str) -> Result<PublisherId, GameError> {
    let digits = label.strip_prefix(['p', 'P']).unwrap_or(label);
    digits.parse().map(PublisherId).map_err(|_| bad(format!("bad publisher label {label:?}; expected p0, p1, ...")))
}

fn money(s: &str, key: &str) -> Result<Money, GameError> {
    let x: f64 = s.parse().map_err(|_| bad(format!("{key} must be a number, got {s:?}")))?;
    if !(x.is_finite() && x >= 0.0) {
        return Err(bad(format!("{key} must be finite and >= 0, got {x}")));
    }
    Ok(x)
}

fn count(s: &str, key: &str) -> Result<u64, GameError> {
    s.parse().map_err(|_| bad(format!("{key} must be a count, got {s:?}")))
}

/// One of `honest`, `withhold:keep=K`, `bribe-to-skip:amount=X[,steps=S]`
/// or `bribe-for-solo:amount=X`. Skip bribes cover the whole `window`
/// unless `steps` is given.
pub fn publisher_strategy(text: &str, window: u64) -> Result<Arc<dyn PublisherStrategy>, GameError> {
    let (name, rest) = text.split_once(':').unwrap_or((text, ""));
    let mut params = BTreeMap::new();
    for kv in rest.split(',').filter(|s| !s.is_empty()) {
        let (k, v) = kv.split_once('=').ok_or_else(|| bad(format!("bad parameter {kv:?}")))?;
        params.insert(k.trim(), v.trim());
    }
    let mut required = |key: &str| params.remove(key).ok_or_else(|| bad(format!("{name} needs {key}=...")));
    let strategy: Arc<dyn PublisherStrategy> = match name {
        "honest" => Arc::new(Honest),
        "withhold" => Arc::new(Withhold { keep: count(required("keep")?, "keep")? as usize }),
        "bribe-to-skip" => {
            let amount = money(required("amount")?, "amount")?;
            let steps = match params.remove("steps") {
                Some(s) => count(s, "steps")?,
                None => window,
            };
            Arc::new(BribeToSkip { amount, steps })
        }
        "bribe-for-solo" => Arc::new(BribeForSolo { amount: money(required("amount")?, "amount")? }),
        other => {
            return Err(bad(format!(
                "unknown strategy {other:?}; expected honest, withhold, bribe-to-skip or bribe-for-solo"
            )))
        }
    };
    if let Some(k) = params.keys().next() {
        return Err(bad(format!("unknown parameter {k:?} for {name}")));
    }
    Ok(strategy)
}

/// One of `honest`, `best-response` or `include-nothing`.
pub fn validator_strategy(name: &str) -> Result<Arc<dyn ValidatorStrategy>, GameError> {
    Ok(match name {
        "honest" => Arc::new(Honest),
        "best-response" => Arc::new(BestResponse::default()),
        "include-nothing" => Arc::new(IncludeNothing),
        other => {
            return Err(bad(format!(
                "unknown validator strategy {other:?}; expected honest, best-response or include-nothing"
            )))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strategy_strings() {
        for ok in [
            "honest",
            "withhold:keep=1",
            "bribe-to-skip:amount=2.5",
            "bribe-to-skip:amount=2.5,steps=1",
            "bribe-for-solo:amount=0",
        ] {
            assert!(publisher_strategy(ok, 3).is_ok(), "{ok}");
        }
        for err in [
            "bribe-to-skip",
            "bribe-to-skip:amount=-1",
            "bribe-to-skip:amount=nan",
            "withhold:keep=1,x=2",
            "withhold:keep",
            "steal",
        ] {
            assert!(matches!(publisher_strategy(err, 3), Err(GameError::Strategy(_))), "{err}");
        }
        assert!(validator_strategy("best-response").is_ok());
        assert!(validator_strategy("lazy").is_err());
    }

    #[test]
    fn labels() {
        assert_eq!(publisher_label("p1").unwrap(), PublisherId(1));
        assert_eq!(publisher_label("P0").unwrap(), PublisherId(0));
        assert_eq!(publisher_label("3").unwrap(), PublisherId(3));
        assert!(publisher_label("q1").is_err());
    }
}
