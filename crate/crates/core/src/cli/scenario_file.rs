//! Line-oriented scenario files.
//!
//! ```text
//! # seven processes, one failure before the start
//! n 7
//! f 1
//! inputs ids
//! fail 1 pre
//! ```
//!
//! Every line is `key value...`; `#` starts a comment. `n` and `f` are
//! required, every other key has a default, and only `fail` may repeat.

use std::collections::BTreeSet;
use std::path::Path;

use crate::collectives::default_candidates;
use crate::error::{Error, Result};
use crate::failmodel::FailurePoint;
use crate::oracle::{Inputs, Scenario};

fn err(line: usize, msg: impl Into<String>) -> Error {
    Error::Scenario { line, msg: msg.into() }
}

fn num<T: std::str::FromStr>(line: usize, tok: Option<&str>, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| err(line, format!("missing {what}")))?;
    tok.parse().map_err(|_| err(line, format!("bad {what} `{tok}`")))
}

fn word<T: std::str::FromStr<Err = Error>>(line: usize, key: &str, tok: Option<&str>) -> Result<T> {
    let tok = tok.ok_or_else(|| err(line, format!("`{key}` needs a value")))?;
    tok.parse().map_err(|e: Error| err(line, e.to_string()))
}

/// Parses a scenario. Relative `inputs file:` paths resolve against
/// `base_dir` when given.
pub fn parse_scenario(text: &str, base_dir: Option<&Path>) -> Result<Scenario> {
    let mut s = Scenario::new(0, 0);
    let mut seen = BTreeSet::new();
    let mut candidates = None;
    let mut n = None;
    let mut f = None;

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut toks = content.split_whitespace();
        let key = toks.next().expect("non-empty line");
        if key != "fail" && !seen.insert(key.to_string()) {
            return Err(err(line, format!("duplicate key `{key}`")));
        }
        match key {
            "n" => n = Some(num(line, toks.next(), "n")?),
            "f" => f = Some(num(line, toks.next(), "f")?),
            "op" => s.op = word(line, key, toks.next())?,
            "collective" => s.collective = word(line, key, toks.next())?,
            "root" => s.root = num(line, toks.next(), "root")?,
            "candidates" => {
                let c = toks.by_ref().map(|t| num(line, Some(t), "candidate")).collect::<Result<Vec<usize>>>()?;
                candidates = Some(c);
            }
            "scheme" => s.scheme = word(line, key, toks.next())?,
            "seed" => s.seed = num(line, toks.next(), "seed")?,
            "inputs" => s.inputs = parse_inputs(line, &mut toks, base_dir)?,
            "transport" => s.transport = word(line, key, toks.next())?,
            "latency" => s.latency = (num(line, toks.next(), "latency min")?, num(line, toks.next(), "latency max")?),
            "start-skew" => s.start_skew = num(line, toks.next(), "start-skew")?,
            "probe-timeout-ms" => s.probe_timeout_ms = num(line, toks.next(), "probe-timeout-ms")?,
            "probe-retries" => s.probe_retries = num(line, toks.next(), "probe-retries")?,
            "fail" => {
                let p: usize = num(line, toks.next(), "process id")?;
                let point = match toks.next() {
                    Some("pre") => FailurePoint::Preoperational,
                    Some("after-sends") => FailurePoint::AfterSends(num(line, toks.next(), "send count")?),
                    other => return Err(err(line, format!("expected `pre` or `after-sends <s>`, got {other:?}"))),
                };
                if s.script.get(p).is_some() {
                    return Err(err(line, format!("process {p} already has a failure")));
                }
                s.script.insert(p, point);
            }
            _ => return Err(err(line, format!("unknown key `{key}`"))),
        }
        if let Some(extra) = toks.next() {
            return Err(err(line, format!("unexpected `{extra}`")));
        }
    }

    s.n = n.ok_or_else(|| err(0, "missing `n`"))?;
    s.f = f.ok_or_else(|| err(0, "missing `f`"))?;
    s.candidates = candidates.unwrap_or_else(|| default_candidates(s.n, s.f));
    s.validate().map_err(|e| err(0, e.to_string()))?;
    Ok(s)
}

fn parse_inputs<'a>(line: usize, toks: &mut impl Iterator<Item = &'a str>, base_dir: Option<&Path>) -> Result<Inputs> {
    match toks.next() {
        Some("probe") => Ok(Inputs::Probe),
        Some("ids") => Ok(Inputs::Ids),
        Some("ones") => Ok(Inputs::Ones),
        Some("multiset") => Ok(Inputs::Multiset),
        Some("values") => Ok(Inputs::Values(toks.map(|t| num(line, Some(t), "input value")).collect::<Result<_>>()?)),
        Some(t) if t.starts_with("file:") => {
            let path = Path::new(&t[5..]);
            let path = match base_dir {
                Some(dir) if path.is_relative() => dir.join(path),
                _ => path.to_path_buf(),
            };
            read_input_values(&path).map_err(|e| err(line, e.to_string()))
        }
        other => Err(err(line, format!("unknown inputs {other:?}"))),
    }
}

/// Whitespace-separated integers, one per process.
pub fn read_input_values(path: &Path) -> Result<Inputs> {
    let text = std::fs::read_to_string(path)?;
    let values = text
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| Error::invalid(format!("bad input value `{t}` in {}", path.display()))))
        .collect::<Result<_>>()?;
    Ok(Inputs::Values(values))
}

/// Renders every field, so that parsing the result gives `s` back.
pub fn render_scenario(s: &Scenario) -> String {
    let join = |v: &mut dyn Iterator<Item = String>| v.collect::<Vec<_>>().join(" ");
    let inputs = match &s.inputs {
        Inputs::Probe => "probe".to_string(),
        Inputs::Ids => "ids".to_string(),
        Inputs::Ones => "ones".to_string(),
        Inputs::Multiset => "multiset".to_string(),
        Inputs::Values(v) => format!("values {}", join(&mut v.iter().map(u64::to_string))),
    };
    let mut out = format!(
        "n {}\nf {}\nop {}\ncollective {}\nroot {}\ncandidates {}\nscheme {}\nseed {}\ninputs {}\ntransport {}\nlatency {} {}\nstart-skew {}\nprobe-timeout-ms {}\nprobe-retries {}\n",
        s.n,
        s.f,
        s.op,
        s.collective,
        s.root,
        join(&mut s.candidates.iter().map(usize::to_string)),
        s.scheme,
        s.seed,
        inputs,
        s.transport,
        s.latency.0,
        s.latency.1,
        s.start_skew,
        s.probe_timeout_ms,
        s.probe_retries,
    );
    for (p, point) in s.script.iter() {
        out.push_str(&format!("fail {p} {point}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::failmodel::FailureScript;
    use crate::oracle::Collective;
    use proptest::prelude::*;

    #[test]
    fn minimal_file_gets_defaults() {
        let s = parse_scenario("n 7\nf 1\nfail 1 pre # dead from the start\n", None).unwrap();
        assert_eq!(s.n, 7);
        assert_eq!(s.candidates, vec![0, 1]);
        assert!(s.script.is_preoperational(1));
        assert_eq!(s.latency, (1, 10));
    }

    #[test]
    fn rejects_bad_lines() {
        for (text, line) in [
            ("n 7\nf 1\ncolour blue\n", 3),
            ("n 7\nn 8\nf 1\n", 2),
            ("n 7\nf 1\nfail 2 later\n", 3),
            ("n 7\nf x\n", 2),
            ("n 7\nf 1 2\n", 2),
        ] {
            match parse_scenario(text, None) {
                Err(Error::Scenario { line: l, .. }) => assert_eq!(l, line, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
        assert!(parse_scenario("f 1\n", None).is_err());
        assert!(parse_scenario("n 3\nf 1\nroot 3\n", None).is_err());
    }

    #[test]
    fn reads_input_file_relative_to_base() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("in.txt"), "5 6\n7\n").unwrap();
        let s = parse_scenario("n 3\nf 0\ninputs file:in.txt\n", Some(dir.path())).unwrap();
        assert_eq!(s.inputs, Inputs::Values(vec![5, 6, 7]));
    }

    proptest! {
        #[test]
        fn render_parse_round_trip(
            n in 1usize..40,
            f in 0usize..5,
            seed in any::<u64>(),
            allreduce in any::<bool>(),
            fails in proptest::collection::btree_map(0usize..40, proptest::option::of(0usize..9), 0..4),
        ) {
            let mut script = FailureScript::new();
            for (p, s) in fails.into_iter().filter(|(p, _)| *p < n) {
                script.insert(p, s.map_or(FailurePoint::Preoperational, FailurePoint::AfterSends));
            }
            let s = Scenario {
                seed,
                script,
                root: n - 1,
                collective: if allreduce { Collective::Allreduce } else { Collective::Reduce },
                ..Scenario::new(n, f)
            };
            prop_assert_eq!(parse_scenario(&render_scenario(&s), None).unwrap(), s);
        }
    }
}
