//! Versioned JSON snapshots of recalibrator state.
//!
//! Floats are serialized in round-trip form, so a restored recalibrator
//! continues bit-identically to the one that was saved.

use std::fs;
use std::path::Path;

use recal_core::{OnlineCalibrator, Recalibrator};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FORMAT: &str = "recal-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    format: String,
    version: u32,
    kind: String,
    state: T,
}

/// State types that can be snapshotted and checked after loading.
pub trait Snapshot: Serialize + DeserializeOwned {
    const KIND: &'static str;
    fn check(&self) -> recal_core::Result<()>;
}

impl Snapshot for Recalibrator {
    const KIND: &'static str = "recalibrator";
    fn check(&self) -> recal_core::Result<()> {
        self.validate()
    }
}

impl Snapshot for OnlineCalibrator {
    const KIND: &'static str = "calibrator";
    fn check(&self) -> recal_core::Result<()> {
        self.validate()
    }
}

pub fn to_json<T: Snapshot>(state: &T) -> Result<String> {
    let env = Envelope {
        format: FORMAT.into(),
        version: VERSION,
        kind: T::KIND.into(),
        state,
    };
    serde_json::to_string(&env).map_err(|e| Error::Data(format!("checkpoint encode: {e}")))
}

pub fn from_json<T: Snapshot>(text: &str) -> Result<T> {
    let env: Envelope<T> =
        serde_json::from_str(text).map_err(|e| Error::Data(format!("checkpoint decode: {e}")))?;
    if env.format != FORMAT {
        return Err(Error::Data(format!(
            "not a checkpoint: format {:?}",
            env.format
        )));
    }
    if env.version != VERSION {
        return Err(Error::Data(format!(
            "unsupported checkpoint version {}",
            env.version
        )));
    }
    if env.kind != T::KIND {
        return Err(Error::Data(format!(
            "checkpoint holds a {}, expected a {}",
            env.kind,
            T::KIND
        )));
    }
    env.state.check()?;
    Ok(env.state)
}

pub fn save<T: Snapshot>(path: &Path, state: &T) -> Result<()> {
    fs::write(path, to_json(state)?).map_err(|e| Error::io(path, e))
}

pub fn load<T: Snapshot>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn driven(steps: u32) -> Recalibrator {
        let mut r = Recalibrator::new(4, 3, 11).unwrap();
        for t in 0..steps {
            r.observe_forecast(f64::from(t % 7) / 6.0).unwrap();
            r.observe_outcome(u8::from(t % 3 == 0)).unwrap();
        }
        r
    }

    #[test]
    fn round_trip_continues_identically() {
        let mut a = driven(200);
        let mut b: Recalibrator = from_json(&to_json(&a).unwrap()).unwrap();
        assert_eq!(a, b);
        for t in 0..100u32 {
            let pf = f64::from(t % 5) / 4.0;
            assert_eq!(
                a.observe_forecast(pf).unwrap(),
                b.observe_forecast(pf).unwrap()
            );
            a.observe_outcome(u8::from(t % 2 == 0)).unwrap();
            b.observe_outcome(u8::from(t % 2 == 0)).unwrap();
        }
        assert_eq!(a, b);
    }

    #[test]
    fn pending_state_survives() {
        let mut a = driven(10);
        a.observe_forecast(0.4).unwrap();
        let b: Recalibrator = from_json(&to_json(&a).unwrap()).unwrap();
        assert_eq!(a, b);
        assert!(b.pending().is_some());
    }

    #[test]
    fn calibrator_round_trip() {
        let mut c = OnlineCalibrator::new(5, 3, 2).unwrap();
        for t in 0..50u8 {
            let p = c.predict().unwrap();
            c.update(&p, t % 2).unwrap();
        }
        let back: OnlineCalibrator = from_json(&to_json(&c).unwrap()).unwrap();
        assert_eq!(c, back);
    }

    #[test]
    fn rejects_wrong_envelope() {
        let text = to_json(&driven(5)).unwrap();
        assert!(from_json::<OnlineCalibrator>(&text).is_err());
        let bumped = text.replace("\"version\":1", "\"version\":2");
        assert!(from_json::<Recalibrator>(&bumped)
            .unwrap_err()
            .to_string()
            .contains("version"));
        assert!(from_json::<Recalibrator>("{}").is_err());
    }

    #[test]
    fn rejects_inconsistent_state() {
        let text = to_json(&driven(5)).unwrap();
        let broken = text.replace("\"steps\":5", "\"steps\":6");
        assert_ne!(text, broken);
        assert!(from_json::<Recalibrator>(&broken).is_err());
    }
}
