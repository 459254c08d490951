use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::checkpoint::Checkpoint;
use crate::config::{PipelineConfig, RqVaeConfig, Section};
use crate::error::{Error, Result};
use crate::nn::{Adam, Conv1d, Ctx, Graph, ParamId, ParamStore, Tensor, TrainingLog, Var};
use crate::representation::{FeatureNormalizer, MotionSequence, FEATURE_DIM};
use crate::rng::{substream, Rng};

pub const CHECKPOINT_TAG: &str = "rqvae";

/// Fraction of training samples decoded from a random prefix of the quantizer layers.
const QUANTIZER_DROPOUT: f64 = 0.2;

const LLOYD_STEPS: usize = 10;

/// Stack of residual codebooks; layer `q` quantizes what layers `< q` left over.
///
/// Trained models keep code 0 of layers `q ≥ 1` at zero.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualCodebooks {
    /// One `K × code_dim` table per layer.
    pub codes: Vec<Tensor>,
}

/// Tokens of one motion: `tokens[t][q]` is the layer-`q` code of latent step `t`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MotionTokenGrid {
    pub tokens: Vec<Vec<usize>>,
    pub downsample: usize,
    /// Frame count of the encoded motion; decoding crops to it.
    pub frames: usize,
}

impl MotionTokenGrid {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn layers(&self) -> usize {
        self.tokens.first().map_or(0, Vec::len)
    }

    /// Base-layer tokens.
    pub fn base(&self) -> Vec<usize> {
        self.tokens.iter().map(|c| c[0]).collect()
    }

    pub fn layer(&self, q: usize) -> Vec<usize> {
        self.tokens.iter().map(|c| c[q]).collect()
    }

    /// Token columns touched by frames marked in `frame_mask`.
    pub fn frame_mask_to_columns(&self, frame_mask: &[bool]) -> Result<Vec<bool>> {
        if frame_mask.len() != self.frames {
            return Err(Error::InvalidArgument(format!("mask covers {} frames, motion has {}", frame_mask.len(), self.frames)));
        }
        Ok((0..self.len())
            .map(|c| (c * self.downsample..((c + 1) * self.downsample).min(self.frames)).any(|f| frame_mask[f]))
            .collect())
    }

    /// Checks indices against `k` codes and `q` layers.
    pub fn validate(&self, k: usize, q: usize) -> Result<()> {
        if self.len() != self.frames.div_ceil(self.downsample) {
            return Err(Error::InvalidArgument(format!("{} token columns for {} frames", self.len(), self.frames)));
        }
        for col in &self.tokens {
            if col.len() != q || col.iter().any(|&t| t >= k) {
                return Err(Error::InvalidArgument(format!("token column {col:?} outside {q} layers of {k} codes")));
            }
        }
        Ok(())
    }
}

/// Index of the nearest row of `codes` to `v`; ties go to the lower index.
pub fn nearest_code(codes: &Tensor, v: &[f64]) -> usize {
    let mut best = (f64::INFINITY, 0);
    for k in 0..codes.rows() {
        let d: f64 = codes.row(k).iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
        if d < best.0 {
            best = (d, k);
        }
    }
    best.1
}

impl ResidualCodebooks {
    pub fn layers(&self) -> usize {
        self.codes.len()
    }

    pub fn size(&self) -> usize {
        self.codes.first().map_or(0, Tensor::rows)
    }

    pub fn code_dim(&self) -> usize {
        self.codes.first().map_or(0, Tensor::cols)
    }

    /// Per-row tokens and the full reconstruction.
    pub fn quantize(&self, z: &Tensor) -> (Vec<Vec<usize>>, Tensor) {
        let mut tokens = vec![Vec::with_capacity(self.layers()); z.rows()];
        let mut recon = Tensor::zeros(z.rows(), z.cols());
        for r in 0..z.rows() {
            let mut residual = z.row(r).to_vec();
            for book in &self.codes {
                let k = nearest_code(book, &residual);
                tokens[r].push(k);
                for (c, (res, out)) in residual.iter_mut().zip(recon.row_mut(r)).enumerate() {
                    *res -= book.get(k, c);
                    *out += book.get(k, c);
                }
            }
        }
        (tokens, recon)
    }

    /// Sum of the codes of the first `layers` layers.
    pub fn lookup(&self, tokens: &[Vec<usize>], layers: usize) -> Tensor {
        let mut out = Tensor::zeros(tokens.len(), self.code_dim());
        for (r, col) in tokens.iter().enumerate() {
            for (q, &k) in col.iter().take(layers).enumerate() {
                for (o, c) in out.row_mut(r).iter_mut().zip(self.codes[q].row(k)) {
                    *o += c;
                }
            }
        }
        out
    }

    /// True when no layer holds two identical codes.
    pub fn codes_distinct(&self) -> bool {
        self.codes.iter().all(|b| (0..b.rows()).all(|i| (0..i).all(|j| b.row(i) != b.row(j))))
    }
}

/// Convolutional autoencoder with a residual quantizer between encoder and decoder.
#[derive(Clone, Debug)]
pub struct RqVae {
    pub config: RqVaeConfig,
    pub store: ParamStore,
    pub normalizer: FeatureNormalizer,
    encoder: Vec<Conv1d>,
    decoder: Vec<Conv1d>,
    codebooks: Vec<ParamId>,
    fitted: bool,
}

impl RqVae {
    pub fn new(config: &RqVaeConfig, normalizer: FeatureNormalizer, seed: u64) -> Result<Self> {
        let r = config.downsample;
        if r == 0 || !r.is_power_of_two() {
            return Err(Error::Config(format!("rqvae.downsample must be a power of two, got {r}")));
        }
        if config.layers == 0 || config.codebook_size < 2 || config.code_dim == 0 {
            return Err(Error::Config("rqvae needs at least one layer of two codes".into()));
        }
        let mut rng = substream(seed, "rqvae.init");
        let rng = &mut rng;
        let mut store = ParamStore::new();
        let s = &mut store;
        let (h, c) = (config.hidden, config.code_dim);
        let stages = r.trailing_zeros() as usize;
        let mut encoder = vec![Conv1d::new(s, "enc.in", FEATURE_DIM, h, 3, 1, 1, rng)];
        for i in 0..stages {
            encoder.push(Conv1d::new(s, &format!("enc.down{i}"), h, h, 4, 2, 1, rng));
        }
        encoder.push(Conv1d::new(s, "enc.out", h, c, 3, 1, 1, rng));
        let mut decoder = vec![Conv1d::new(s, "dec.in", c, h, 3, 1, 1, rng)];
        for i in 0..stages {
            decoder.push(Conv1d::new(s, &format!("dec.up{i}"), h, h, 3, 1, 1, rng));
        }
        decoder.push(Conv1d::new(s, "dec.out", h, FEATURE_DIM, 3, 1, 1, rng));
        let codebooks = (0..config.layers).map(|q| s.normal(format!("codebook{q}"), config.codebook_size, c, 0.1, rng)).collect();
        Ok(Self { config: config.clone(), store, normalizer, encoder, decoder, codebooks, fitted: false })
    }

    pub fn is_fitted(&self) -> bool {
        self.fitted
    }

    fn check_fitted(&self) -> Result<()> {
        if self.fitted {
            Ok(())
        } else {
            Err(Error::NotFitted("rqvae codebooks are untrained".into()))
        }
    }

    pub fn codebooks(&self) -> ResidualCodebooks {
        ResidualCodebooks { codes: self.codebooks.iter().map(|&id| self.store.get(id).clone()).collect() }
    }

    pub fn codebook_param(&self, q: usize) -> ParamId {
        self.codebooks[q]
    }

    /// Normalized features padded by repeating the last frame to a multiple of `r`.
    fn prepare(&self, motion: &MotionSequence) -> Tensor {
        let x = self.normalizer.normalize(motion.features());
        let t = x.rows();
        let padded = t.div_ceil(self.config.downsample) * self.config.downsample;
        let idx: Vec<usize> = (0..padded).map(|i| i.min(t - 1)).collect();
        let rows: Vec<Vec<f64>> = idx.iter().map(|&i| x.row(i).to_vec()).collect();
        Tensor::from_rows(&rows)
    }

    pub fn encode_var(&self, cx: &Ctx, x: Var) -> Var {
        let g = cx.g;
        let last = self.encoder.len() - 1;
        let mut h = x;
        for (i, conv) in self.encoder.iter().enumerate() {
            h = conv.forward(cx, h);
            if i < last {
                h = g.relu(h);
            }
        }
        h
    }

    /// Decoder from `T′ × code_dim` latents to `T′·r × 263` normalized features.
    pub fn decode_var(&self, cx: &Ctx, z: Var) -> Var {
        let g = cx.g;
        let last = self.decoder.len() - 1;
        let mut h = g.relu(self.decoder[0].forward(cx, z));
        for (i, conv) in self.decoder.iter().enumerate().skip(1) {
            if i < last {
                let n = g.shape(h).0;
                let up: Vec<usize> = (0..2 * n).map(|k| k / 2).collect();
                h = g.relu(conv.forward(cx, g.gather_rows(h, &up)));
            } else {
                h = conv.forward(cx, h);
            }
        }
        h
    }

    /// Continuous encoder output for a motion.
    pub fn latents(&self, motion: &MotionSequence) -> Tensor {
        let g = Graph::new();
        let cx = Ctx::new(&g, &self.store);
        let z = self.encode_var(&cx, g.leaf(self.prepare(motion)));
        g.tensor(z)
    }

    /// Residual quantization of the encoder output. A residual layer whose
    /// codes would make the decoded motion worse is replaced by code 0 (the
    /// origin), so reconstruction never degrades as layers are added.
    pub fn encode(&self, motion: &MotionSequence) -> Result<MotionTokenGrid> {
        self.check_fitted()?;
        let books = self.codebooks();
        let mut residual = self.latents(motion);
        let target = self.normalizer.normalize(motion.features());
        let mut grid = MotionTokenGrid { tokens: vec![Vec::new(); residual.rows()], downsample: self.config.downsample, frames: motion.frames() };
        let mut best = f64::INFINITY;
        for (q, book) in books.codes.iter().enumerate() {
            let picks: Vec<usize> = (0..residual.rows()).map(|r| nearest_code(book, residual.row(r))).collect();
            for (col, &k) in grid.tokens.iter_mut().zip(&picks) {
                col.push(k);
            }
            let err = mse(&self.decode_prefix(&books, &grid.tokens, q + 1, grid.frames), &target);
            let keep = q == 0 || err <= best;
            if keep {
                best = err;
                for (r, &k) in picks.iter().enumerate() {
                    for (v, c) in residual.row_mut(r).iter_mut().zip(book.row(k)) {
                        *v -= c;
                    }
                }
            } else {
                for col in &mut grid.tokens {
                    col[q] = 0;
                }
            }
        }
        Ok(grid)
    }

    fn decode_prefix(&self, books: &ResidualCodebooks, tokens: &[Vec<usize>], layers: usize, frames: usize) -> Tensor {
        let g = Graph::new();
        let cx = Ctx::new(&g, &self.store);
        let out = g.tensor(self.decode_var(&cx, g.leaf(books.lookup(tokens, layers))));
        out.slice_rows(0, frames)
    }

    /// Decodes using the first `layers` quantizer layers.
    pub fn decode_layers(&self, grid: &MotionTokenGrid, layers: usize) -> Result<MotionSequence> {
        Ok(MotionSequence::from_network_output(self.normalizer.denormalize(&self.decode_normalized(grid, layers)?))?)
    }

    pub fn decode(&self, grid: &MotionTokenGrid) -> Result<MotionSequence> {
        self.decode_layers(grid, self.config.layers)
    }

    /// Normalized features cropped to the grid's frame count.
    pub fn decode_normalized(&self, grid: &MotionTokenGrid, layers: usize) -> Result<Tensor> {
        self.check_fitted()?;
        grid.validate(self.config.codebook_size, self.config.layers)?;
        if grid.downsample != self.config.downsample {
            return Err(Error::InvalidArgument(format!("grid downsample {} ≠ {}", grid.downsample, self.config.downsample)));
        }
        Ok(self.decode_prefix(&self.codebooks(), &grid.tokens, layers.min(self.config.layers), grid.frames))
    }

    /// Mean squared error in normalized feature space after decoding with `layers` layers.
    pub fn reconstruction_mse(&self, motion: &MotionSequence, layers: usize) -> Result<f64> {
        let grid = self.encode(motion)?;
        let out = self.decode_normalized(&grid, layers)?;
        Ok(mse(&out, &self.normalizer.normalize(motion.features())))
    }

    pub fn to_checkpoint(&self, config: &PipelineConfig) -> Checkpoint {
        let mut ck = Checkpoint::new(CHECKPOINT_TAG, config, Section::RqVae);
        ck.insert_store(&self.store);
        ck.insert("normalizer", self.normalizer.to_tensor());
        ck.insert("fitted", Tensor::scalar(if self.fitted { 1.0 } else { 0.0 }));
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        if ck.tag != CHECKPOINT_TAG {
            return Err(Error::format("checkpoint", format!("expected an {CHECKPOINT_TAG} checkpoint, found {}", ck.tag)));
        }
        let config = ck.config()?;
        let mut model = Self::new(&config.rqvae, FeatureNormalizer::from_tensor(ck.get("normalizer")?)?, config.seed)?;
        ck.load_store(&mut model.store)?;
        model.fitted = ck.get("fitted")?.item() == 1.0;
        Ok(model)
    }

    /// Keeps code 0 of every residual layer at the origin, so a residual
    /// layer can always leave the reconstruction unchanged.
    fn pin_zero_codes(&mut self) {
        for &id in self.codebooks.iter().skip(1) {
            self.store.get_mut(id).row_mut(0).fill(0.0);
        }
    }

    /// Sets codebook `q` directly, for hand-built quantizers.
    pub fn set_codebooks(&mut self, books: &ResidualCodebooks) -> Result<()> {
        if books.layers() != self.config.layers {
            return Err(Error::Dim(format!("{} codebook layers, model has {}", books.layers(), self.config.layers)));
        }
        for (q, b) in books.codes.iter().enumerate() {
            if b.shape() != self.store.get(self.codebooks[q]).shape() {
                return Err(Error::Dim(format!("codebook {q} has shape {:?}", b.shape())));
            }
            *self.store.get_mut(self.codebooks[q]) = b.clone();
        }
        self.fitted = true;
        Ok(())
    }
}

fn mse(a: &Tensor, b: &Tensor) -> f64 {
    a.zip_map(b, |x, y| (x - y) * (x - y)).sum() / a.len() as f64
}

/// Picks `k` rows of `pool` as codes; when the pool is too small, rows are
/// reused with small seeded jitter so codes stay distinct.
fn seed_codes(pool: &[Vec<f64>], k: usize, rng: &mut Rng) -> Tensor {
    let n = pool.len();
    let picks: Vec<usize> = if n >= k { sample(rng, n, k).into_vec() } else { (0..k).map(|i| i % n).collect() };
    let mut rows = Vec::with_capacity(k);
    for (i, &p) in picks.iter().enumerate() {
        let mut row = pool[p].clone();
        if n < k || i >= n {
            for v in &mut row {
                *v += 1e-3 * rng.sample::<f64, _>(StandardNormal);
            }
        }
        rows.push(row);
    }
    Tensor::from_rows(&rows)
}

/// Trains the tokenizer on `motions`.
///
/// Codebooks start from encoder outputs (layer by layer on the residuals);
/// codes unused during an epoch are reseeded from that epoch's residuals.
/// Gradients cross the quantizer unchanged.
pub fn train_rqvae(motions: &[MotionSequence], config: &PipelineConfig) -> Result<(RqVae, TrainingLog)> {
    if motions.is_empty() {
        return Err(Error::InsufficientSamples("rqvae training needs at least one motion".into()));
    }
    config.validate()?;
    let cfg = &config.rqvae;
    let normalizer = FeatureNormalizer::fit(motions.iter().map(MotionSequence::features))?;
    let mut model = RqVae::new(cfg, normalizer, config.seed)?;
    let inputs: Vec<Tensor> = motions.iter().map(|m| model.prepare(m)).collect();
    let mut rng = substream(config.seed, "rqvae.train");
    init_codebooks(&mut model, &inputs, &mut rng);
    model.fitted = true;
    let mut opt = Adam::new(cfg.lr);
    let mut log = TrainingLog::default();
    let (k, layers) = (cfg.codebook_size, cfg.layers);
    for epoch in 0..cfg.epochs {
        let order = crate::rng::seeded_permutation(inputs.len(), rng.random());
        let mut usage = vec![vec![0usize; k]; layers];
        let mut residual_pool: Vec<Vec<Vec<f64>>> = vec![Vec::new(); layers];
        let mut sums: BTreeMap<String, f64> = BTreeMap::new();
        let mut total = 0.0;
        let batch = cfg.batch_size.max(1);
        let mut batches = 0usize;
        for chunk in order.chunks(batch) {
            let g = Graph::new();
            let cx = Ctx::new(&g, &model.store);
            let books = model.codebooks();
            let mut rec_terms = Vec::new();
            let mut commit_terms = Vec::new();
            let mut book_terms = Vec::new();
            for &i in chunk {
                let x = g.leaf(inputs[i].clone());
                let z = model.encode_var(&cx, x);
                let zt = g.tensor(z);
                let (tokens, _) = books.quantize(&zt);
                let mut residual = zt.clone();
                // Quantizer dropout: some samples decode from a prefix of the layers.
                let active = if rng.random::<f64>() < QUANTIZER_DROPOUT { rng.random_range(1..=layers) } else { layers };
                let mut partial = Vec::with_capacity(layers);
                let mut zq: Option<Var> = None;
                for q in 0..layers {
                    let idx: Vec<usize> = tokens.iter().map(|c| c[q]).collect();
                    for (r, &t) in idx.iter().enumerate() {
                        usage[q][t] += 1;
                        residual_pool[q].push(residual.row(r).to_vec());
                    }
                    let codes = g.gather_rows(cx.p(model.codebooks[q]), &idx);
                    book_terms.push(g.mean(g.square(g.sub(codes, g.leaf(residual.clone())))));
                    for (r, &t) in idx.iter().enumerate() {
                        for (v, c) in residual.row_mut(r).iter_mut().zip(books.codes[q].row(t)) {
                            *v -= c;
                        }
                    }
                    let sum = zq.map_or(codes, |a| g.add(a, codes));
                    partial.push(sum);
                    zq = Some(sum);
                }
                let zq = zq.expect("at least one layer");
                commit_terms.push(g.mean(g.square(g.sub(z, g.detach(zq)))));
                // Straight-through: forward uses the quantized value, backward reaches z.
                let st = g.add(z, g.detach(g.sub(partial[active - 1], z)));
                let out = model.decode_var(&cx, st);
                rec_terms.push(g.mean(g.smooth_l1(g.sub(out, x))));
            }
            let avg = |terms: Vec<Var>| {
                let n = terms.len() as f64;
                g.scale(terms.into_iter().reduce(|a, b| g.add(a, b)).expect("nonempty"), 1.0 / n)
            };
            let (rec, commit, book) = (avg(rec_terms), avg(commit_terms), avg(book_terms));
            let loss = g.add(rec, g.add(g.scale(commit, cfg.commitment), book));
            let value = g.item(loss);
            if !value.is_finite() {
                return Err(Error::TrainingDiverged { epoch });
            }
            for (name, v) in [("rec", rec), ("commit", commit), ("codebook", book)] {
                *sums.entry(name.to_string()).or_default() += g.item(v);
            }
            let grads = g.backward(loss);
            let pg = cx.param_grads(&grads);
            drop(cx);
            opt.step(&mut model.store, &pg);
            model.pin_zero_codes();
            total += value;
            batches += 1;
        }
        if epoch + 1 < cfg.epochs {
            reseed_dead_codes(&mut model, &usage, &residual_pool, &mut rng);
        }
        let n = batches as f64;
        log.push(epoch, total / n, sums.into_iter().map(|(k, v)| (k, v / n)).collect());
    }
    refine_codebooks(&mut model, &inputs);
    model.store.snap_to_f32();
    if !model.store.all_finite() {
        return Err(Error::TrainingDiverged { epoch: cfg.epochs });
    }
    Ok((model, log))
}

fn init_codebooks(model: &mut RqVae, inputs: &[Tensor], rng: &mut Rng) {
    let mut pool: Vec<Vec<f64>> = Vec::new();
    for x in inputs {
        let g = Graph::new();
        let cx = Ctx::new(&g, &model.store);
        let z = g.tensor(model.encode_var(&cx, g.leaf(x.clone())));
        pool.extend((0..z.rows()).map(|r| z.row(r).to_vec()));
    }
    for q in 0..model.config.layers {
        let mut book = seed_codes(&pool, model.config.codebook_size, rng);
        if q > 0 {
            book.row_mut(0).fill(0.0);
        }
        for row in &mut pool {
            let k = nearest_code(&book, row);
            for (v, c) in row.iter_mut().zip(book.row(k)) {
                *v -= c;
            }
        }
        *model.store.get_mut(model.codebooks[q]) = book;
    }
}

/// Lloyd iterations on the final encoder outputs, layer by layer: each used
/// code moves to the mean of the residuals assigned to it.
fn refine_codebooks(model: &mut RqVae, inputs: &[Tensor]) {
    let mut pool: Vec<Vec<f64>> = Vec::new();
    for x in inputs {
        let g = Graph::new();
        let cx = Ctx::new(&g, &model.store);
        let z = g.tensor(model.encode_var(&cx, g.leaf(x.clone())));
        pool.extend((0..z.rows()).map(|r| z.row(r).to_vec()));
    }
    let dim = model.config.code_dim;
    for q in 0..model.config.layers {
        let id = model.codebooks[q];
        for _ in 0..LLOYD_STEPS {
            let book = model.store.get(id).clone();
            let mut sums = vec![vec![0.0; dim]; book.rows()];
            let mut counts = vec![0usize; book.rows()];
            for row in &pool {
                let k = nearest_code(&book, row);
                counts[k] += 1;
                for (s, v) in sums[k].iter_mut().zip(row) {
                    *s += v;
                }
            }
            let out = model.store.get_mut(id);
            for (k, (s, &n)) in sums.iter().zip(&counts).enumerate() {
                if n > 0 && !(q > 0 && k == 0) {
                    for (o, v) in out.row_mut(k).iter_mut().zip(s) {
                        *o = v / n as f64;
                    }
                }
            }
        }
        let book = model.store.get(id).clone();
        for row in &mut pool {
            let k = nearest_code(&book, row);
            for (v, c) in row.iter_mut().zip(book.row(k)) {
                *v -= c;
            }
        }
    }
}

fn reseed_dead_codes(model: &mut RqVae, usage: &[Vec<usize>], pools: &[Vec<Vec<f64>>], rng: &mut Rng) {
    for (q, counts) in usage.iter().enumerate() {
        let pool = &pools[q];
        if pool.is_empty() {
            continue;
        }
        let book = model.store.get_mut(model.codebooks[q]);
        for (k, &c) in counts.iter().enumerate() {
            if c == 0 && !(q > 0 && k == 0) {
                let src = &pool[rng.random_range(0..pool.len())];
                for (d, v) in book.row_mut(k).iter_mut().zip(src) {
                    *d = v + 1e-3 * rng.sample::<f64, _>(StandardNormal);
                }
            }
        }
    }
}
