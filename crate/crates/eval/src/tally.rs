//! Head-to-head preference tallies from pairwise votes.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::{EvalError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    A,
    B,
    Tie,
}

impl FromStr for Outcome {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(Self::A),
            "B" => Ok(Self::B),
            "TIE" => Ok(Self::Tie),
            other => Err(format!("outcome {other:?} is not one of A, B, TIE")),
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::A => "A",
            Self::B => "B",
            Self::Tie => "TIE",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PairwiseVote {
    pub model_a: String,
    pub model_b: String,
    pub outcome: Outcome,
}

impl PairwiseVote {
    pub fn new(model_a: &str, model_b: &str, outcome: Outcome) -> std::result::Result<Self, String> {
        if model_a == model_b {
            return Err(format!("model {model_a:?} is compared with itself"));
        }
        if model_a.is_empty() || model_b.is_empty() {
            return Err("model name is empty".into());
        }
        Ok(Self {
            model_a: model_a.to_string(),
            model_b: model_b.to_string(),
            outcome,
        })
    }
}

/// Counts from our side of a comparison.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Record {
    pub wins: u64,
    pub ties: u64,
    pub losses: u64,
}

impl Record {
    pub fn total(&self) -> u64 {
        self.wins + self.ties + self.losses
    }

    fn add(&mut self, other: Record) {
        self.wins += other.wins;
        self.ties += other.ties;
        self.losses += other.losses;
    }
}

impl fmt::Display for Record {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.wins, self.ties, self.losses)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TallyReport {
    pub ours: String,
    pub per_competitor: BTreeMap<String, Record>,
    pub overall: Record,
}

impl TallyReport {
    /// `competitor,wins,ties,losses` rows, then an `overall` row.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["competitor", "wins", "ties", "losses"])?;
        let rows = self
            .per_competitor
            .iter()
            .map(|(name, r)| (name.as_str(), r))
            .chain([("overall", &self.overall)]);
        for (name, r) in rows {
            w.write_record([name, &r.wins.to_string(), &r.ties.to_string(), &r.losses.to_string()])?;
        }
        let bytes = w.into_inner().map_err(|e| EvalError::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }
}

/// Wins, ties and losses of `ours` against each competitor. Errors name the
/// 1-based position of a vote that does not involve `ours`.
pub fn aggregate_tally(votes: &[PairwiseVote], ours: &str) -> Result<TallyReport> {
    tally_rows(votes.iter().enumerate().map(|(i, v)| (i + 1, v)), ours)
}

/// As [`aggregate_tally`], with explicit row numbers for error messages.
pub fn tally_rows<'a>(votes: impl IntoIterator<Item = (usize, &'a PairwiseVote)>, ours: &str) -> Result<TallyReport> {
    let mut per_competitor: BTreeMap<String, Record> = BTreeMap::new();
    for (row, vote) in votes {
        let (competitor, ours_won, ours_lost) = if vote.model_a == ours {
            (&vote.model_b, Outcome::A, Outcome::B)
        } else if vote.model_b == ours {
            (&vote.model_a, Outcome::B, Outcome::A)
        } else {
            return Err(EvalError::row(
                row,
                format!("vote {} vs {} does not involve {ours:?}", vote.model_a, vote.model_b),
            ));
        };
        let r = per_competitor.entry(competitor.clone()).or_default();
        match vote.outcome {
            o if o == ours_won => r.wins += 1,
            o if o == ours_lost => r.losses += 1,
            _ => r.ties += 1,
        }
    }
    let mut overall = Record::default();
    for r in per_competitor.values() {
        overall.add(*r);
    }
    Ok(TallyReport {
        ours: ours.to_string(),
        per_competitor,
        overall,
    })
}

/// Parses a `model_a,model_b,outcome` CSV (optional header line) into votes
/// paired with their line numbers.
pub fn parse_votes(text: &str) -> Result<Vec<(usize, PairwiseVote)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| match e.position() {
            Some(p) => EvalError::row(p.line() as usize, e.to_string()),
            None => EvalError::Csv(e),
        })?;
        let row = record.position().map_or(i + 1, |p| p.line() as usize);
        let fields: Vec<&str> = record.iter().collect();
        if i == 0 && fields.iter().map(|f| f.to_ascii_lowercase()).eq(["model_a", "model_b", "outcome"]) {
            continue;
        }
        let [a, b, outcome] = fields[..] else {
            return Err(EvalError::row(row, format!("expected 3 fields, found {}", fields.len())));
        };
        let outcome = outcome.parse().map_err(|e| EvalError::row(row, e))?;
        let vote = PairwiseVote::new(a, b, outcome).map_err(|e| EvalError::row(row, e))?;
        out.push((row, vote));
    }
    Ok(out)
}

/// Serializes votes with a header line.
pub fn votes_csv(votes: &[PairwiseVote]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["model_a", "model_b", "outcome"])?;
    for v in votes {
        w.write_record([v.model_a.as_str(), v.model_b.as_str(), &v.outcome.to_string()])?;
    }
    let bytes = w.into_inner().map_err(|e| EvalError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vote(a: &str, b: &str, o: Outcome) -> PairwiseVote {
        PairwiseVote::new(a, b, o).unwrap()
    }

    #[test]
    fn perspective_follows_position() {
        let votes = [
            vote("us", "x", Outcome::A),
            vote("x", "us", Outcome::B),
            vote("x", "us", Outcome::A),
            vote("us", "x", Outcome::Tie),
        ];
        let r = aggregate_tally(&votes, "us").unwrap();
        assert_eq!(r.per_competitor["x"], Record { wins: 2, ties: 1, losses: 1 });
        assert_eq!(r.overall, r.per_competitor["x"]);
    }

    #[test]
    fn trivial_tallies() {
        let r = aggregate_tally(&[], "us").unwrap();
        assert!(r.per_competitor.is_empty());
        assert_eq!(r.overall, Record::default());
        let r = aggregate_tally(&[vote("x", "us", Outcome::Tie)], "us").unwrap();
        assert_eq!(r.overall, Record { wins: 0, ties: 1, losses: 0 });
    }

    #[test]
    fn foreign_vote_names_its_row() {
        let votes = [vote("us", "x", Outcome::A), vote("x", "y", Outcome::A)];
        let err = aggregate_tally(&votes, "us").unwrap_err();
        assert_eq!(err.row_number(), Some(2));
    }

    #[test]
    fn parses_files() {
        let text = "model_a,model_b,outcome\nus,x,A\n  x , us , tie \n";
        let votes = parse_votes(text).unwrap();
        assert_eq!(votes.len(), 2);
        assert_eq!(votes[1], (3, vote("x", "us", Outcome::Tie)));
        assert_eq!(parse_votes(&votes_csv(&[votes[0].1.clone()]).unwrap()).unwrap()[0].1, votes[0].1);
    }

    #[test]
    fn malformed_votes_name_their_row() {
        for (text, row) in [
            ("us,x,A\nus,x\n", 2),
            ("us,x,A\nus,x,WIN\n", 2),
            ("model_a,model_b,outcome\nus,us,A\n", 2),
            ("us,x,A\nus,x,A\nus,,B\n", 3),
        ] {
            let err = parse_votes(text).unwrap_err();
            assert_eq!(err.row_number(), Some(row), "{text:?}: {err}");
        }
    }

    #[test]
    fn report_csv() {
        let r = aggregate_tally(&[vote("us", "b", Outcome::A), vote("us", "a", Outcome::B)], "us").unwrap();
        assert_eq!(r.to_csv().unwrap(), "competitor,wins,ties,losses\na,0,0,1\nb,1,0,0\noverall,1,0,1\n");
    }
}
