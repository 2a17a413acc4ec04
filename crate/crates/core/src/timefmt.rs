//! Whole-second UTC timestamps rendered as RFC 3339 (`YYYY-MM-DDTHH:MM:SSZ`).

use chrono::{DateTime, SecondsFormat, SubsecRound, Utc};

use crate::error::{Error, Result};

pub type Timestamp = DateTime<Utc>;

pub fn now() -> Timestamp {
    Utc::now().trunc_subsecs(0)
}

pub fn render(t: &Timestamp) -> String {
    t.trunc_subsecs(0).to_rfc3339_opts(SecondsFormat::Secs, true)
}

pub fn parse(s: &str) -> Result<Timestamp> {
    let t = DateTime::parse_from_rfc3339(s)
        .map_err(|e| Error::parse("timestamp", format!("{s:?}: {e}")))?
        .with_timezone(&Utc);
    Ok(t.trunc_subsecs(0))
}

pub(crate) mod serde_secs {
    use super::*;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &Timestamp, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&render(t))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Timestamp, D::Error> {
        let s = String::deserialize(d)?;
        parse(&s).map_err(serde::de::Error::custom)
    }
}
