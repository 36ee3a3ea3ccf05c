//! Component recursive systematic convolutional codes.
//!
//! A rate-k/(k+1) RSC code is described by a feedback polynomial `h0(D)` and
//! one parity numerator `h_i(D)` per input, all stored constant-term-first.
//! The parity stream satisfies `v(D) h0(D) = sum_i h_i(D) u_i(D)`; the
//! systematic outputs are the inputs themselves.
//!
//! The trellis uses the observer canonical realization, which needs only
//! `memory` delay elements for any number of inputs.

use std::fmt;

use crate::error::{Error, Result};

/// Definition of a rate-k/(k+1) recursive systematic convolutional code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratorSpec {
    pub label: String,
    pub num_inputs: usize,
    pub memory: usize,
    /// Feedback coefficients, constant term first, length `memory + 1`.
    pub feedback: Vec<u8>,
    /// One numerator per input, constant term first, each of length `memory + 1`.
    pub parity_numerators: Vec<Vec<u8>>,
}

impl GeneratorSpec {
    pub fn new(
        label: impl Into<String>,
        feedback: Vec<u8>,
        parity_numerators: Vec<Vec<u8>>,
    ) -> Result<Self> {
        if feedback.len() < 2 {
            return Err(Error::InvalidGenerator("memory must be at least 1".into()));
        }
        let spec = GeneratorSpec {
            label: label.into(),
            num_inputs: parity_numerators.len(),
            memory: feedback.len() - 1,
            feedback,
            parity_numerators,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.memory == 0 {
            return Err(Error::InvalidGenerator("memory must be at least 1".into()));
        }
        if self.num_inputs == 0 || self.parity_numerators.len() != self.num_inputs {
            return Err(Error::InvalidGenerator("at least one input is required".into()));
        }
        if self.memory > 8 {
            return Err(Error::InvalidGenerator(format!("memory {} exceeds 8", self.memory)));
        }
        let len = self.memory + 1;
        if self.feedback.len() != len || self.parity_numerators.iter().any(|p| p.len() != len) {
            return Err(Error::InvalidGenerator(format!(
                "all coefficient vectors must have length {len}"
            )));
        }
        let all = std::iter::once(&self.feedback).chain(self.parity_numerators.iter());
        if all.flatten().any(|&b| b > 1) {
            return Err(Error::InvalidGenerator("coefficients must be 0 or 1".into()));
        }
        if self.feedback[0] != 1 {
            return Err(Error::InvalidGenerator(
                "feedback constant term must be 1".into(),
            ));
        }
        Ok(())
    }

    /// `[1, 0, 1/(1+D+D^2); 0, 1, (1+D^2)/(1+D+D^2)]`.
    pub fn g457() -> Self {
        Self::new("G457", vec![1, 1, 1], vec![vec![1, 0, 0], vec![1, 0, 1]]).unwrap()
    }

    /// `[1, 0, (1+D^2)/(1+D+D^2); 0, 1, (D+D^2)/(1+D+D^2)]`.
    pub fn g537() -> Self {
        Self::new("G537", vec![1, 1, 1], vec![vec![1, 0, 1], vec![0, 1, 1]]).unwrap()
    }

    /// `[1, 0, (D+D^2)/(1+D+D^2); 0, 1, (1+D^2)/(1+D+D^2)]`.
    pub fn g357() -> Self {
        Self::new("G357", vec![1, 1, 1], vec![vec![0, 1, 1], vec![1, 0, 1]]).unwrap()
    }

    /// Rate-1/2 code `[1, (1+D+D^3)/(1+D^2+D^3)]`.
    pub fn g15_13() -> Self {
        Self::new("G15/13", vec![1, 0, 1, 1], vec![vec![1, 1, 0, 1]]).unwrap()
    }

    /// Looks up one of the bundled generators by label (case-insensitive,
    /// with or without the leading `G`).
    pub fn builtin(label: &str) -> Option<Self> {
        let key = label.trim().trim_start_matches(['G', 'g']).replace('_', "/");
        match key.as_str() {
            "457" => Some(Self::g457()),
            "537" => Some(Self::g537()),
            "357" => Some(Self::g357()),
            "15/13" | "1513" => Some(Self::g15_13()),
            _ => None,
        }
    }

    /// Parses a generator definition file. Each generator is a `[label]`
    /// section with `k`, `memory`, `feedback` and `k` `parity` lines; bit
    /// strings are written constant term first.
    pub fn parse_file(text: &str) -> Result<Vec<Self>> {
        struct Partial {
            label: String,
            line: usize,
            k: Option<usize>,
            memory: Option<usize>,
            feedback: Option<Vec<u8>>,
            parity: Vec<Vec<u8>>,
        }
        fn finish(p: Partial) -> Result<GeneratorSpec> {
            let err = |msg: &str| Error::Parse { line: p.line, msg: format!("[{}] {msg}", p.label) };
            let feedback = p.feedback.clone().ok_or_else(|| err("missing feedback"))?;
            let spec = GeneratorSpec::new(p.label.clone(), feedback, p.parity.clone())
                .map_err(|e| err(&e.to_string()))?;
            if p.k.is_some_and(|k| k != spec.num_inputs) {
                return Err(err("k does not match the number of parity rows"));
            }
            if p.memory.is_some_and(|m| m != spec.memory) {
                return Err(err("memory does not match the feedback length"));
            }
            Ok(spec)
        }
        fn bits(s: &str, line: usize) -> Result<Vec<u8>> {
            s.chars()
                .filter(|c| !c.is_whitespace())
                .map(|c| match c {
                    '0' => Ok(0),
                    '1' => Ok(1),
                    _ => Err(Error::Parse { line, msg: format!("bad bit '{c}'") }),
                })
                .collect()
        }

        let mut out = Vec::new();
        let mut cur: Option<Partial> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(label) = content.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                if let Some(p) = cur.take() {
                    out.push(finish(p)?);
                }
                cur = Some(Partial {
                    label: label.trim().to_string(),
                    line,
                    k: None,
                    memory: None,
                    feedback: None,
                    parity: Vec::new(),
                });
                continue;
            }
            let p = cur
                .as_mut()
                .ok_or(Error::Parse { line, msg: "entry outside a [label] section".into() })?;
            let (key, value) = content
                .split_once('=')
                .ok_or(Error::Parse { line, msg: "expected key = value".into() })?;
            let value = value.trim();
            let num = |v: &str| {
                v.parse::<usize>()
                    .map_err(|_| Error::Parse { line, msg: format!("bad integer '{v}'") })
            };
            match key.trim() {
                "k" => p.k = Some(num(value)?),
                "memory" => p.memory = Some(num(value)?),
                "feedback" => p.feedback = Some(bits(value, line)?),
                "parity" => p.parity.push(bits(value, line)?),
                other => {
                    return Err(Error::Parse { line, msg: format!("unknown key '{other}'") })
                }
            }
        }
        if let Some(p) = cur.take() {
            out.push(finish(p)?);
        }
        Ok(out)
    }

    pub fn to_file_section(&self) -> String {
        let b = |v: &[u8]| v.iter().map(|x| char::from(b'0' + x)).collect::<String>();
        let mut s = format!(
            "[{}]\nk = {}\nmemory = {}\nfeedback = {}\n",
            self.label,
            self.num_inputs,
            self.memory,
            b(&self.feedback)
        );
        for p in &self.parity_numerators {
            s.push_str(&format!("parity = {}\n", b(p)));
        }
        s
    }
}

impl fmt::Display for GeneratorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)
    }
}

/// State-transition tables of an RSC code. Input tuples are packed into an
/// integer with input `i` at bit `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trellis {
    num_inputs: usize,
    memory: usize,
    num_states: usize,
    next: Vec<u16>,
    parity: Vec<u8>,
}

impl Trellis {
    pub fn new(spec: &GeneratorSpec) -> Result<Self> {
        spec.validate()?;
        let nu = spec.memory;
        let k = spec.num_inputs;
        let num_states = 1usize << nu;
        let num_tuples = 1usize << k;
        let mut next = vec![0u16; num_states * num_tuples];
        let mut parity = vec![0u8; num_states * num_tuples];
        for s in 0..num_states {
            for u in 0..num_tuples {
                let bit = |i: usize| ((u >> i) & 1) as u8;
                let reg = |j: usize| if j >= 1 && j <= nu { ((s >> (j - 1)) & 1) as u8 } else { 0 };
                let mut v = reg(1);
                for i in 0..k {
                    v ^= spec.parity_numerators[i][0] & bit(i);
                }
                let mut ns = 0usize;
                for j in 1..=nu {
                    let mut b = reg(j + 1) ^ (spec.feedback[j] & v);
                    for i in 0..k {
                        b ^= spec.parity_numerators[i][j] & bit(i);
                    }
                    ns |= (b as usize) << (j - 1);
                }
                next[s * num_tuples + u] = ns as u16;
                parity[s * num_tuples + u] = v;
            }
        }
        Ok(Trellis { num_inputs: k, memory: nu, num_states, next, parity })
    }

    pub fn num_inputs(&self) -> usize {
        self.num_inputs
    }

    pub fn memory(&self) -> usize {
        self.memory
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    /// Number of input tuples per state, `2^k`.
    pub fn num_tuples(&self) -> usize {
        1 << self.num_inputs
    }

    #[inline]
    pub fn next_state(&self, state: usize, tuple: usize) -> usize {
        self.next[state * self.num_tuples() + tuple] as usize
    }

    #[inline]
    pub fn parity(&self, state: usize, tuple: usize) -> u8 {
        self.parity[state * self.num_tuples() + tuple]
    }

    /// Encodes `inputs.len() == k` equal-length bit sequences starting from
    /// `start_state`, returning the parity sequence and the final state.
    pub fn encode<S: AsRef<[u8]>>(&self, inputs: &[S], start_state: usize) -> Result<(Vec<u8>, usize)> {
        if inputs.len() != self.num_inputs {
            return Err(Error::LengthMismatch { expected: self.num_inputs, got: inputs.len() });
        }
        let n = inputs[0].as_ref().len();
        for inp in inputs {
            if inp.as_ref().len() != n {
                return Err(Error::LengthMismatch { expected: n, got: inp.as_ref().len() });
            }
        }
        let mut state = start_state;
        let mut out = Vec::with_capacity(n);
        for pos in 0..n {
            let tuple = inputs
                .iter()
                .enumerate()
                .fold(0usize, |acc, (i, inp)| acc | (((inp.as_ref()[pos] & 1) as usize) << i));
            out.push(self.parity(state, tuple));
            state = self.next_state(state, tuple);
        }
        Ok((out, state))
    }
}
