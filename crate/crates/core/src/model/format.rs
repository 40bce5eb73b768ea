//! The line-oriented instance file format.
//!
//! ```text
//! ra 1
//! machines 2
//! # comment
//! job a 1/2 : 1
//! job b 1/1 : 1 2
//! ```
//!
//! Machines are numbered from 1 in files. Sizes are `num/den` (a bare integer
//! is accepted on input). The serializer emits jobs in file order with an
//! explicit denominator on every size.

use std::fmt::Write as _;

use thiserror::Error;

use super::{Instance, MachineId, ModelError};
use crate::scalar::{parse_scalar, Scalar};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("expected header `ra 1`")]
    BadHeader,
    #[error("expected `machines <m>` with m >= 1")]
    BadMachines,
    #[error("malformed job line: {0}")]
    Malformed(String),
    #[error("empty permitted set")]
    EmptyPermittedSet,
    #[error("nonpositive size")]
    NonPositiveSize,
    #[error("machine {0} out of range")]
    MachineOutOfRange(usize),
    #[error("machine {0} listed twice")]
    DuplicateMachine(usize),
    #[error("duplicate job name `{0}`")]
    DuplicateJob(String),
    #[error("unexpected input: {0}")]
    Unexpected(String),
    #[error("input is not valid UTF-8")]
    Encoding,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub kind: ParseErrorKind,
}

fn err(line: usize, kind: ParseErrorKind) -> ParseError {
    ParseError { line, kind }
}

/// Parses an instance file. Jobs come back sorted by size; each keeps its name
/// and file position so output can be reported in the original order.
pub fn parse_instance<S: Scalar>(text: &[u8]) -> Result<Instance<S>, ParseError> {
    let text = std::str::from_utf8(text).map_err(|_| err(0, ParseErrorKind::Encoding))?;
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(n, l)| (n + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    match lines.next() {
        Some((_, l)) if l.split_whitespace().collect::<Vec<_>>() == ["ra", "1"] => {}
        Some((n, _)) => return Err(err(n, ParseErrorKind::BadHeader)),
        None => return Err(err(1, ParseErrorKind::BadHeader)),
    }
    let (machines_line, machines) = match lines.next() {
        Some((n, l)) => {
            let toks: Vec<_> = l.split_whitespace().collect();
            match toks.as_slice() {
                ["machines", m] => match m.parse::<usize>() {
                    Ok(m) if m >= 1 => (n, m),
                    _ => return Err(err(n, ParseErrorKind::BadMachines)),
                },
                _ => return Err(err(n, ParseErrorKind::BadMachines)),
            }
        }
        None => return Err(err(text.lines().count().max(1), ParseErrorKind::BadMachines)),
    };

    let mut jobs = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for (n, l) in lines {
        let (head, tail) = l
            .split_once(':')
            .ok_or_else(|| err(n, ParseErrorKind::Malformed("missing `:`".into())))?;
        let toks: Vec<_> = head.split_whitespace().collect();
        let (name, size) = match toks.as_slice() {
            ["job", name, size] => (name.to_string(), *size),
            ["job", ..] => {
                return Err(err(
                    n,
                    ParseErrorKind::Malformed("expected `job <name> <num>/<den> : ...`".into()),
                ))
            }
            _ => return Err(err(n, ParseErrorKind::Unexpected(l.to_string()))),
        };
        let size: S = parse_scalar(size)
            .ok_or_else(|| err(n, ParseErrorKind::Malformed(format!("bad size `{size}`"))))?;
        if !size.is_positive() {
            return Err(err(n, ParseErrorKind::NonPositiveSize));
        }
        let mut permitted = Vec::new();
        for tok in tail.split_whitespace() {
            let m: usize = tok
                .parse()
                .map_err(|_| err(n, ParseErrorKind::Malformed(format!("bad machine `{tok}`"))))?;
            if m == 0 || m > machines {
                return Err(err(n, ParseErrorKind::MachineOutOfRange(m)));
            }
            if permitted.contains(&MachineId(m - 1)) {
                return Err(err(n, ParseErrorKind::DuplicateMachine(m)));
            }
            permitted.push(MachineId(m - 1));
        }
        if permitted.is_empty() {
            return Err(err(n, ParseErrorKind::EmptyPermittedSet));
        }
        if !seen.insert(name.clone()) {
            return Err(err(n, ParseErrorKind::DuplicateJob(name)));
        }
        jobs.push((name, size, permitted));
    }

    Instance::new(machines, jobs).map_err(|e| {
        // Everything Instance::new checks was already checked per line.
        let kind = match e {
            ModelError::NoMachines => ParseErrorKind::BadMachines,
            other => ParseErrorKind::Unexpected(other.to_string()),
        };
        err(machines_line, kind)
    })
}

/// Canonical text form: jobs in original order, sizes as `num/den`.
pub fn serialize_instance<S: Scalar>(inst: &Instance<S>) -> String {
    let mut out = String::new();
    writeln!(out, "ra 1").unwrap();
    writeln!(out, "machines {}", inst.machine_count()).unwrap();
    for j in inst.original_order() {
        let job = inst.job(j);
        write!(out, "job {} {} :", job.name, job.size.to_frac_string()).unwrap();
        for m in &job.permitted {
            write!(out, " {}", m.number()).unwrap();
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::JobId;
    use num_rational::BigRational;

    type Q = BigRational;

    #[test]
    fn two_job_example() {
        let text = b"ra 1\nmachines 2\njob a 1/2 : 1\njob b 1 : 1 2\n";
        let inst: Instance<Q> = parse_instance(text).unwrap();
        assert_eq!(inst.size(JobId(0)), &Q::from_frac(1, 2));
        assert_eq!(inst.size(JobId(1)), &Q::from_frac(1, 1));
        assert_eq!(inst.permitted(JobId(1)), &[MachineId(0), MachineId(1)]);
    }

    #[test]
    fn empty_permitted_set_reports_line() {
        let text = b"ra 1\n# two machines\nmachines 2\njob a 1/2 : 1\njob b 1/3 :\n";
        let e = parse_instance::<Q>(text).unwrap_err();
        assert_eq!(e.line, 5);
        assert_eq!(e.kind, ParseErrorKind::EmptyPermittedSet);
        assert!(e.to_string().contains("empty permitted set"));
    }

    #[test]
    fn nonpositive_size() {
        let e = parse_instance::<Q>(b"ra 1\nmachines 1\njob a 0/3 : 1\n").unwrap_err();
        assert_eq!((e.line, e.kind), (3, ParseErrorKind::NonPositiveSize));
        let e = parse_instance::<Q>(b"ra 1\nmachines 1\njob a -1/3 : 1\n").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::NonPositiveSize);
    }

    #[test]
    fn malformed_lines() {
        assert_eq!(parse_instance::<Q>(b"ra 2\n").unwrap_err().kind, ParseErrorKind::BadHeader);
        assert_eq!(
            parse_instance::<Q>(b"ra 1\nmachines 0\n").unwrap_err().kind,
            ParseErrorKind::BadMachines
        );
        let e = parse_instance::<Q>(b"ra 1\nmachines 1\njob a 1/x : 1\n").unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::Malformed(_)));
        let e = parse_instance::<Q>(b"ra 1\nmachines 1\njob a 1/2 : 2\n").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::MachineOutOfRange(2));
        let e = parse_instance::<Q>(b"ra 1\nmachines 2\njob a 1/2 : 1\njob a 1/2 : 2\n").unwrap_err();
        assert_eq!((e.line, e.kind), (4, ParseErrorKind::DuplicateJob("a".into())));
    }

    #[test]
    fn serializer_keeps_file_order() {
        let text = "ra 1\nmachines 2\njob big 3/2 : 2\njob tiny 1/4 : 1 2\n";
        let inst: Instance<Q> = parse_instance(text.as_bytes()).unwrap();
        assert_eq!(inst.job(JobId(0)).name, "tiny");
        assert_eq!(serialize_instance(&inst), text);
    }
}
