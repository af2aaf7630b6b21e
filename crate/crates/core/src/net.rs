//! The three-layer network and its evaluation.
//!
//! A network maps an input vector of width `m` through `n` hidden neurons
//! to an output vector of width `l`:
//!
//! ```text
//! h = w_in * x + b_hid        (hidden pre-activation)
//! z = w_out * f(h) + b_out    (affine output layer)
//! ```
//!
//! The hidden transfer `f` is the only nonlinearity. Weights are stored
//! row-major in plain `Vec<f64>` so the trainer can address every
//! parameter by a single flat index.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Hidden-layer transfer function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransferKind {
    /// `f(h) = tanh(h)`, range [-1, 1].
    Tanh,
    /// `f(h) = exp(-h^2)`, range (0, 1].
    Gauss,
}

impl TransferKind {
    #[inline]
    pub(crate) fn apply(self, h: f64) -> f64 {
        match self {
            TransferKind::Tanh => h.tanh(),
            TransferKind::Gauss => (-h * h).exp(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TransferKind::Tanh => "tanh",
            TransferKind::Gauss => "gauss",
        }
    }
}

impl fmt::Display for TransferKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TransferKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(TransferKind::Tanh),
            "gauss" => Ok(TransferKind::Gauss),
            other => Err(Error::Format(format!("unknown transfer kind '{other}'"))),
        }
    }
}

/// Evaluate the transfer function at `h`.
pub fn transfer(kind: TransferKind, h: f64) -> Result<f64> {
    if !h.is_finite() {
        return Err(Error::Domain(format!("transfer input not finite: {h}")));
    }
    Ok(kind.apply(h))
}

/// A three-layer `m - n - l` network.
///
/// Immutable after construction from the caller's perspective; `forward`
/// is pure and safe to call concurrently on a shared network.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    m: usize,
    n: usize,
    l: usize,
    transfer: TransferKind,
    /// n x m, row-major: `w_in[j * m + i]` feeds hidden j from input i.
    pub(crate) w_in: Vec<f64>,
    pub(crate) b_hid: Vec<f64>,
    /// l x n, row-major: `w_out[k * n + j]` feeds output k from hidden j.
    pub(crate) w_out: Vec<f64>,
    pub(crate) b_out: Vec<f64>,
}

impl Network {
    /// Build a network from explicit weight arrays. Shapes are checked
    /// exactly; values must all be finite.
    pub fn new(
        m: usize,
        n: usize,
        l: usize,
        transfer: TransferKind,
        w_in: Vec<f64>,
        b_hid: Vec<f64>,
        w_out: Vec<f64>,
        b_out: Vec<f64>,
    ) -> Result<Self> {
        if m == 0 || n == 0 || l == 0 {
            return Err(Error::Shape(format!("zero dimension in {m}-{n}-{l} network")));
        }
        if w_in.len() != n * m {
            return Err(Error::Shape(format!(
                "w_in has {} entries, expected {}",
                w_in.len(),
                n * m
            )));
        }
        if b_hid.len() != n {
            return Err(Error::Shape(format!(
                "b_hid has {} entries, expected {n}",
                b_hid.len()
            )));
        }
        if w_out.len() != l * n {
            return Err(Error::Shape(format!(
                "w_out has {} entries, expected {}",
                w_out.len(),
                l * n
            )));
        }
        if b_out.len() != l {
            return Err(Error::Shape(format!(
                "b_out has {} entries, expected {l}",
                b_out.len()
            )));
        }
        let finite = w_in
            .iter()
            .chain(&b_hid)
            .chain(&w_out)
            .chain(&b_out)
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Domain("network weights must be finite".into()));
        }
        Ok(Network {
            m,
            n,
            l,
            transfer,
            w_in,
            b_hid,
            w_out,
            b_out,
        })
    }

    /// All weights and biases zero.
    pub fn zeroed(m: usize, n: usize, l: usize, transfer: TransferKind) -> Result<Self> {
        Network::new(
            m,
            n,
            l,
            transfer,
            vec![0.0; n * m],
            vec![0.0; n],
            vec![0.0; l * n],
            vec![0.0; l],
        )
    }

    /// Every weight and bias drawn uniformly from `[-bound, +bound]` with a
    /// seeded generator; the same seed always yields the same network.
    pub fn init_random(
        m: usize,
        n: usize,
        l: usize,
        transfer: TransferKind,
        bound: f64,
        seed: u64,
    ) -> Result<Self> {
        if !(bound > 0.0) {
            return Err(Error::Domain(format!("init bound must be > 0, got {bound}")));
        }
        let mut net = Network::zeroed(m, n, l, transfer)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for p in 0..net.param_count() {
            net.set_param(p, rng.random_range(-bound..=bound));
        }
        Ok(net)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn transfer(&self) -> TransferKind {
        self.transfer
    }

    /// Total number of free parameters: `n*m + n + l*n + l`.
    pub fn param_count(&self) -> usize {
        self.n * self.m + self.n + self.l * self.n + self.l
    }

    /// Read parameter `p` under the flat ordering w_in, b_hid, w_out, b_out.
    pub fn param(&self, p: usize) -> f64 {
        let (nm, n, ln) = (self.n * self.m, self.n, self.l * self.n);
        if p < nm {
            self.w_in[p]
        } else if p < nm + n {
            self.b_hid[p - nm]
        } else if p < nm + n + ln {
            self.w_out[p - nm - n]
        } else {
            self.b_out[p - nm - n - ln]
        }
    }

    pub fn set_param(&mut self, p: usize, value: f64) {
        let (nm, n, ln) = (self.n * self.m, self.n, self.l * self.n);
        if p < nm {
            self.w_in[p] = value;
        } else if p < nm + n {
            self.b_hid[p - nm] = value;
        } else if p < nm + n + ln {
            self.w_out[p - nm - n] = value;
        } else {
            self.b_out[p - nm - n - ln] = value;
        }
    }

    /// Largest weight/bias magnitude.
    pub fn max_abs_param(&self) -> f64 {
        (0..self.param_count())
            .map(|p| self.param(p).abs())
            .fold(0.0, f64::max)
    }

    /// Evaluate the network on `x`.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.m {
            return Err(Error::Shape(format!(
                "input has length {}, network expects {}",
                x.len(),
                self.m
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("input entries must be finite".into()));
        }
        let mut z = vec![0.0; self.l];
        self.forward_into(x, &mut z);
        Ok(z)
    }

    /// Unchecked forward pass into a caller-owned buffer. `x` must have
    /// length `m` and `z` length `l`.
    pub(crate) fn forward_into(&self, x: &[f64], z: &mut [f64]) {
        debug_assert_eq!(x.len(), self.m);
        debug_assert_eq!(z.len(), self.l);
        let mut hidden = vec![0.0; self.n];
        for j in 0..self.n {
            let row = &self.w_in[j * self.m..(j + 1) * self.m];
            let mut h = self.b_hid[j];
            for (w, xi) in row.iter().zip(x) {
                h += w * xi;
            }
            hidden[j] = self.transfer.apply(h);
        }
        for k in 0..self.l {
            let row = &self.w_out[k * self.n..(k + 1) * self.n];
            let mut acc = self.b_out[k];
            for (w, a) in row.iter().zip(&hidden) {
                acc += w * a;
            }
            z[k] = acc;
        }
    }

    /// Write the network to a flat text model file.
    ///
    /// Layout: a version line, a header line `m n l transfer`, then the
    /// four weight blocks (row-major w_in, b_hid, w_out, b_out) one block
    /// per line, entries space-separated. Floats are printed with Rust's
    /// shortest round-trip formatting, so load-after-save is bit-exact.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::with_capacity(self.param_count() * 20);
        out.push_str("dyncopy-net v1\n");
        out.push_str(&format!("{} {} {} {}\n", self.m, self.n, self.l, self.transfer));
        for block in [&self.w_in, &self.b_hid, &self.w_out, &self.b_out] {
            let mut first = true;
            for v in block.iter() {
                if !first {
                    out.push(' ');
                }
                out.push_str(&format!("{v}"));
                first = false;
            }
            out.push('\n');
        }
        fs::write(path, out)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut lines = text.lines();
        let magic = lines
            .next()
            .ok_or_else(|| Error::Format("empty model file".into()))?;
        if magic != "dyncopy-net v1" {
            return Err(Error::Format(format!("bad model magic '{magic}'")));
        }
        let header = lines
            .next()
            .ok_or_else(|| Error::Format("missing model header".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::Format(format!(
                "model header has {} fields, expected 4",
                fields.len()
            )));
        }
        let m: usize = fields[0]
            .parse()
            .map_err(|_| Error::Format("bad m in model header".into()))?;
        let n: usize = fields[1]
            .parse()
            .map_err(|_| Error::Format("bad n in model header".into()))?;
        let l: usize = fields[2]
            .parse()
            .map_err(|_| Error::Format("bad l in model header".into()))?;
        let transfer: TransferKind = fields[3].parse()?;
        let mut blocks = Vec::with_capacity(4);
        for (name, want) in [("w_in", n * m), ("b_hid", n), ("w_out", l * n), ("b_out", l)] {
            let line = lines
                .next()
                .ok_or_else(|| Error::Format(format!("missing {name} block")))?;
            let vals: std::result::Result<Vec<f64>, _> =
                line.split_whitespace().map(f64::from_str).collect();
            let vals = vals.map_err(|_| Error::Format(format!("unparseable value in {name}")))?;
            if vals.len() != want {
                return Err(Error::Format(format!(
                    "{name} has {} entries, expected {want}",
                    vals.len()
                )));
            }
            blocks.push(vals);
        }
        let b_out = blocks.pop().unwrap();
        let w_out = blocks.pop().unwrap();
        let b_hid = blocks.pop().unwrap();
        let w_in = blocks.pop().unwrap();
        Network::new(m, n, l, transfer, w_in, b_hid, w_out, b_out)
    }
}
