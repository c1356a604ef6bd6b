//! Latent factor matrices, the regularized objective, SGD epochs, and RMSE.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::Entry;
use crate::error::{Error, Result};

/// Learning rate and regularization coefficient for one SGD pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperparams {
    pub eta: f64,
    pub lambda: f64,
}

impl Hyperparams {
    pub fn new(eta: f64, lambda: f64) -> Result<Hyperparams> {
        if eta <= 0.0 || !eta.is_finite() {
            return Err(Error::InvalidParam(format!("eta must be positive, got {eta}")));
        }
        if lambda < 0.0 || !lambda.is_finite() {
            return Err(Error::InvalidParam(format!(
                "lambda must be non-negative, got {lambda}"
            )));
        }
        Ok(Hyperparams { eta, lambda })
    }
}

/// Dense row-major factor matrices X (|U| x f) and Y (|I| x f).
#[derive(Debug, Clone, PartialEq)]
pub struct LatentFactors {
    n_users: usize,
    n_items: usize,
    f: usize,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl LatentFactors {
    /// Seeded uniform initialization in [0, 0.004]: keeps initial predictions
    /// near zero on rating-scale data.
    pub fn init(n_users: usize, n_items: usize, f: usize, seed: u64) -> Result<LatentFactors> {
        if n_users == 0 || n_items == 0 || f == 0 {
            return Err(Error::InvalidParam(
                "factor dimensions must be positive".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(Self::from_fn(n_users, n_items, f, |_, _| {
            rng.random_range(0.0..=0.004)
        }))
    }

    /// Fill X then Y through a generator called as (matrix, flat_index).
    pub fn from_fn(
        n_users: usize,
        n_items: usize,
        f: usize,
        mut gen: impl FnMut(usize, usize) -> f64,
    ) -> LatentFactors {
        let x = (0..n_users * f).map(|k| gen(0, k)).collect();
        let y = (0..n_items * f).map(|k| gen(1, k)).collect();
        LatentFactors {
            n_users,
            n_items,
            f,
            x,
            y,
        }
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn dim(&self) -> usize {
        self.f
    }

    pub fn user_row(&self, u: u32) -> Result<&[f64]> {
        let u = u as usize;
        if u >= self.n_users {
            return Err(Error::IndexOutOfRange(format!("user {u}")));
        }
        Ok(&self.x[u * self.f..(u + 1) * self.f])
    }

    pub fn item_row(&self, i: u32) -> Result<&[f64]> {
        let i = i as usize;
        if i >= self.n_items {
            return Err(Error::IndexOutOfRange(format!("item {i}")));
        }
        Ok(&self.y[i * self.f..(i + 1) * self.f])
    }

    pub fn user_row_mut(&mut self, u: u32) -> Result<&mut [f64]> {
        let u = u as usize;
        if u >= self.n_users {
            return Err(Error::IndexOutOfRange(format!("user {u}")));
        }
        Ok(&mut self.x[u * self.f..(u + 1) * self.f])
    }

    pub fn item_row_mut(&mut self, i: u32) -> Result<&mut [f64]> {
        let i = i as usize;
        if i >= self.n_items {
            return Err(Error::IndexOutOfRange(format!("item {i}")));
        }
        Ok(&mut self.y[i * self.f..(i + 1) * self.f])
    }

    /// Predicted rating `<x_u, y_i>`.
    pub fn predict(&self, u: u32, i: u32) -> Result<f64> {
        let xu = self.user_row(u)?;
        let yi = self.item_row(i)?;
        Ok(dot(xu, yi))
    }

    /// Instant loss on one entry: squared error plus the regularization term
    /// `lambda * (|x_u|^2 + |y_i|^2)`.
    pub fn instant_loss(&self, entry: &Entry, hp: Hyperparams) -> Result<f64> {
        let xu = self.user_row(entry.user)?;
        let yi = self.item_row(entry.item)?;
        let e = entry.rating - dot(xu, yi);
        Ok(e * e + hp.lambda * (dot(xu, xu) + dot(yi, yi)))
    }

    /// One SGD pass over the training entries in a seeded shuffled order.
    ///
    /// Per entry: `e = r - <x_u, y_i>`, then
    /// `x_u += eta * (e * y_i - lambda * x_u)` and
    /// `y_i += eta * (e * x_u_old - lambda * y_i)` with the pre-update `x_u`.
    ///
    /// A non-finite factor after an update aborts the epoch with
    /// [`Error::Diverged`]; factors are left as they are, the caller decides
    /// whether to roll back.
    pub fn sgd_epoch(&mut self, train: &[Entry], hp: Hyperparams, order_seed: u64) -> Result<()> {
        let mut order: Vec<u32> = (0..train.len() as u32).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(order_seed);
        order.shuffle(&mut rng);

        let f = self.f;
        let mut x_old = vec![0.0f64; f];
        for &k in &order {
            let entry = &train[k as usize];
            let (u, i) = (entry.user as usize, entry.item as usize);
            if u >= self.n_users {
                return Err(Error::IndexOutOfRange(format!("user {u}")));
            }
            if i >= self.n_items {
                return Err(Error::IndexOutOfRange(format!("item {i}")));
            }
            let xu = &mut self.x[u * f..(u + 1) * f];
            let yi = &mut self.y[i * f..(i + 1) * f];
            x_old.copy_from_slice(xu);
            let e = entry.rating - dot(xu, yi);
            let mut finite = e.is_finite();
            for d in 0..f {
                xu[d] += hp.eta * (e * yi[d] - hp.lambda * xu[d]);
                yi[d] += hp.eta * (e * x_old[d] - hp.lambda * yi[d]);
                finite &= xu[d].is_finite() && yi[d].is_finite();
            }
            if !finite {
                return Err(Error::Diverged {
                    eta: hp.eta,
                    lambda: hp.lambda,
                });
            }
        }
        Ok(())
    }

    /// RMSE over an evaluation set; predictions are not clipped.
    pub fn rmse(&self, eval_set: &[Entry]) -> Result<f64> {
        if eval_set.is_empty() {
            return Err(Error::EmptyEvalSet);
        }
        let mut sum = 0.0;
        for e in eval_set {
            let p = self.predict(e.user, e.item)?;
            let d = e.rating - p;
            sum += d * d;
        }
        Ok((sum / eval_set.len() as f64).sqrt())
    }

    /// Text matrix file: header line `n_users n_items f`, then X and Y
    /// row-major, one row per line.
    pub fn write_file(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        out.push_str(&format!("{} {} {}\n", self.n_users, self.n_items, self.f));
        for row in self.x.chunks(self.f).chain(self.y.chunks(self.f)) {
            let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read_file(path: &Path) -> Result<LatentFactors> {
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Format {
                path: path.to_path_buf(),
                msg: "empty file".into(),
            })?
            .map_err(|e| Error::io(path, e))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Format {
                path: path.to_path_buf(),
                msg: format!("bad header {header:?}"),
            })?;
        if dims.len() != 3 {
            return Err(Error::Format {
                path: path.to_path_buf(),
                msg: "header must be `n_users n_items f`".into(),
            });
        }
        let (n_users, n_items, f) = (dims[0], dims[1], dims[2]);
        let mut values = Vec::with_capacity((n_users + n_items) * f);
        for line in lines {
            let line = line.map_err(|e| Error::io(path, e))?;
            for tok in line.split_whitespace() {
                values.push(tok.parse::<f64>().map_err(|_| Error::Format {
                    path: path.to_path_buf(),
                    msg: format!("bad value {tok:?}"),
                })?);
            }
        }
        if values.len() != (n_users + n_items) * f {
            return Err(Error::Format {
                path: path.to_path_buf(),
                msg: format!(
                    "expected {} values, got {}",
                    (n_users + n_items) * f,
                    values.len()
                ),
            });
        }
        let y = values.split_off(n_users * f);
        Ok(LatentFactors {
            n_users,
            n_items,
            f,
            x: values,
            y,
        })
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
