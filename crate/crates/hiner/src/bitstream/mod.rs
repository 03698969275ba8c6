//! The `.hinr` container: quantized, Huffman-coded embeddings and decoder
//! weights, plus an optional encoder side-channel that is not counted toward
//! the rate.
//!
//! Layout, little-endian throughout:
//!
//! ```text
//! "HINR" | version u8 | flags u8 | H u32 | W u32 | C u32
//! base_b f32 | levels_l u16 (0 = raw wavelength input)
//! stride count u8 | strides u8..
//! embed h0 u16 | w0 u16 | c0 u16
//! width count u8 | widths u16..
//! bitwidth u8 | tensor count u16
//! per tensor:
//!   name len u8 | name | rank u8 | dims u32..
//!   min f32 | scale f32 | code lengths (max(256, 2^b) bytes)
//!   payload bit length u64 | payload (padded to a byte)
//! ```
//!
//! Flags: bit 0 = encoder tensors present, bit 1 = encoder is a frozen
//! projection. Bitwidth 32 marks a float checkpoint, whose tensors carry only
//! name, dims, bit length and raw f32 values.

pub mod huffman;
pub mod quant;

use serde::{Deserialize, Serialize};

pub use huffman::{code_lengths, huffman_decode, huffman_encode, HuffmanPayload, HuffmanTable};
pub use quant::{check_bitwidth, quantize_tensor, QuantSpec, QuantizedTensor};

use crate::codec::{
    Decoder, DecoderConfig, EmbedShape, EncoderKind, Embeddings, HinerModel, PosEncodingConfig, WavelengthEncoder,
    WavelengthInput,
};
use crate::error::{Error, Result};
use crate::hsi_io::{HsiCube, WavelengthGrid};
use crate::nn::Linear;

pub const MAGIC: [u8; 4] = *b"HINR";
pub const VERSION: u8 = 1;
pub const FLAG_ENCODER: u8 = 1;
pub const FLAG_FIXED_PROJECTION: u8 = 2;
const FLOAT_BITWIDTH: u8 = 32;

pub const EMBEDDINGS: &str = "embeddings";
pub const ENCODER_WEIGHT: &str = "encoder.weight";
pub const ENCODER_BIAS: &str = "encoder.bias";

/// Whether a record counts toward the rate.
pub fn is_rate_counted(name: &str) -> bool {
    !name.starts_with("encoder.")
}

/// Everything needed to rebuild the architecture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamHeader {
    pub height: usize,
    pub width: usize,
    pub bands: usize,
    pub input: WavelengthInput,
    pub strides: Vec<usize>,
    pub embed_shape: EmbedShape,
    pub widths: Vec<usize>,
    pub bitwidth: u8,
    /// Present when the encoder travels as a side-channel.
    pub encoder: Option<EncoderKind>,
}

impl StreamHeader {
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.bands)
    }

    pub fn decoder_config(&self) -> DecoderConfig {
        DecoderConfig {
            embed_shape: self.embed_shape,
            strides: self.strides.clone(),
            channel_widths: self.widths.clone(),
            kernel_size: 3,
            target_hw: (self.height, self.width),
        }
    }
}

/// A quantized model as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct HinerBitstream {
    pub header: StreamHeader,
    pub tensors: Vec<QuantizedTensor>,
}

/// Byte accounting of a serialized stream; the fields sum to the file size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamSizes {
    pub header: usize,
    /// Names, dims, min/scale and bit-length fields of every record.
    pub record_meta: usize,
    pub tables: usize,
    /// Entropy-coded bytes of the embedding and decoder records.
    pub rate_payload: usize,
    /// Entropy-coded bytes of the encoder side-channel.
    pub side_payload: usize,
}

impl StreamSizes {
    pub fn total(&self) -> usize {
        self.header + self.record_meta + self.tables + self.rate_payload + self.side_payload
    }
}

fn table_len(bitwidth: u8) -> usize {
    1usize << bitwidth.max(8)
}

fn write_header(out: &mut Vec<u8>, h: &StreamHeader, tensor_count: usize) -> Result<()> {
    let narrow = |v: usize, max: usize, what: &str| {
        if v > max {
            Err(Error::InvalidInput(format!("{what} = {v} does not fit the stream header")))
        } else {
            Ok(v)
        }
    };
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    let mut flags = 0u8;
    if let Some(kind) = h.encoder {
        flags |= FLAG_ENCODER;
        if kind == EncoderKind::FixedProjection {
            flags |= FLAG_FIXED_PROJECTION;
        }
    }
    out.push(flags);
    for v in [h.height, h.width, h.bands] {
        out.extend_from_slice(&(narrow(v, u32::MAX as usize, "dimension")? as u32).to_le_bytes());
    }
    let (base, levels) = match h.input {
        WavelengthInput::Fourier(pe) => (pe.base_b as f32, pe.levels_l),
        WavelengthInput::Raw => (0.0, 0),
    };
    out.extend_from_slice(&base.to_le_bytes());
    out.extend_from_slice(&(narrow(levels, u16::MAX as usize, "levels_l")? as u16).to_le_bytes());
    out.push(narrow(h.strides.len(), 255, "stride count")? as u8);
    for &s in &h.strides {
        out.push(narrow(s, 255, "stride")? as u8);
    }
    for v in [h.embed_shape.h, h.embed_shape.w, h.embed_shape.c] {
        out.extend_from_slice(&(narrow(v, u16::MAX as usize, "embedding dimension")? as u16).to_le_bytes());
    }
    out.push(narrow(h.widths.len(), 255, "width count")? as u8);
    for &w in &h.widths {
        out.extend_from_slice(&(narrow(w, u16::MAX as usize, "channel width")? as u16).to_le_bytes());
    }
    out.push(h.bitwidth);
    out.extend_from_slice(&(narrow(tensor_count, u16::MAX as usize, "tensor count")? as u16).to_le_bytes());
    Ok(())
}

fn write_record_meta(out: &mut Vec<u8>, name: &str, shape: &[usize]) -> Result<()> {
    if name.len() > 255 || shape.len() > 255 {
        return Err(Error::InvalidInput(format!("tensor {name} has too long a name or rank")));
    }
    out.push(name.len() as u8);
    out.extend_from_slice(name.as_bytes());
    out.push(shape.len() as u8);
    for &d in shape {
        if d > u32::MAX as usize {
            return Err(Error::InvalidInput(format!("tensor {name} dimension {d} too large")));
        }
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Truncated(what));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &'static str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &'static str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &'static str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &'static str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f32(&mut self, what: &'static str) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

fn read_header(r: &mut Reader) -> Result<(StreamHeader, usize)> {
    let magic: [u8; 4] = r.take(4, "magic")?.try_into().unwrap();
    if magic != MAGIC {
        return Err(Error::BadMagic(magic));
    }
    let version = r.u8("version")?;
    if version != VERSION {
        return Err(Error::VersionMismatch { found: version, expected: VERSION });
    }
    let flags = r.u8("flags")?;
    if flags & !(FLAG_ENCODER | FLAG_FIXED_PROJECTION) != 0 {
        return Err(Error::MalformedHeader(format!("unknown flag bits {flags:#04x}")));
    }
    let height = r.u32("height")? as usize;
    let width = r.u32("width")? as usize;
    let bands = r.u32("bands")? as usize;
    let base = r.f32("positional encoding base")?;
    let levels = r.u16("positional encoding levels")? as usize;
    let input = if levels == 0 {
        WavelengthInput::Raw
    } else {
        WavelengthInput::Fourier(
            PosEncodingConfig::new(base as f64, levels).map_err(|e| Error::MalformedHeader(e.to_string()))?,
        )
    };
    let n_strides = r.u8("stride count")? as usize;
    let strides = r.take(n_strides, "strides")?.iter().map(|&s| s as usize).collect();
    let embed_shape = EmbedShape::new(r.u16("embedding shape")? as usize, r.u16("embedding shape")? as usize, r.u16("embedding shape")? as usize);
    let n_widths = r.u8("width count")? as usize;
    let widths = (0..n_widths).map(|_| r.u16("channel widths").map(|w| w as usize)).collect::<Result<_>>()?;
    let bitwidth = r.u8("bitwidth")?;
    if bitwidth != FLOAT_BITWIDTH {
        check_bitwidth(bitwidth).map_err(|e| Error::MalformedHeader(e.to_string()))?;
    }
    let tensor_count = r.u16("tensor count")? as usize;
    let encoder = match (flags & FLAG_ENCODER != 0, flags & FLAG_FIXED_PROJECTION != 0) {
        (true, false) => Some(EncoderKind::Learned),
        (true, true) => Some(EncoderKind::FixedProjection),
        (false, false) => None,
        (false, true) => return Err(Error::MalformedHeader("projection flag set without an encoder".into())),
    };
    let header = StreamHeader { height, width, bands, input, strides, embed_shape, widths, bitwidth, encoder };
    if height == 0 || width == 0 || bands == 0 {
        return Err(Error::MalformedHeader("zero dimension".into()));
    }
    header.decoder_config().validate().map_err(|e| Error::MalformedHeader(e.to_string()))?;
    Ok((header, tensor_count))
}

fn read_record_meta(r: &mut Reader) -> Result<(String, Vec<usize>)> {
    let name_len = r.u8("tensor name")? as usize;
    let name = std::str::from_utf8(r.take(name_len, "tensor name")?)
        .map_err(|_| Error::MalformedHeader("tensor name is not UTF-8".into()))?
        .to_string();
    let rank = r.u8("tensor rank")? as usize;
    let shape = (0..rank).map(|_| r.u32("tensor dims").map(|d| d as usize)).collect::<Result<_>>()?;
    Ok((name, shape))
}

/// Names and shapes every stream with this header must carry, in order.
pub fn expected_tensors(header: &StreamHeader, with_embeddings: bool) -> Result<Vec<(String, Vec<usize>)>> {
    let decoder = Decoder::zeros(header.decoder_config())?;
    let e = header.embed_shape;
    let mut out = Vec::new();
    if with_embeddings {
        out.push((EMBEDDINGS.to_string(), vec![header.bands, e.c, e.h, e.w]));
    }
    out.extend(decoder.tensors().into_iter().map(|(n, s, _)| (n, s)));
    if header.encoder.is_some() {
        out.push((ENCODER_WEIGHT.into(), vec![e.len(), header.input.dim()]));
        out.push((ENCODER_BIAS.into(), vec![e.len()]));
    }
    Ok(out)
}

fn check_layout(header: &StreamHeader, found: &[(String, Vec<usize>)], with_embeddings: bool) -> Result<()> {
    let expected = expected_tensors(header, with_embeddings)?;
    if expected.as_slice() != found {
        let names: Vec<&str> = found.iter().map(|(n, _)| n.as_str()).collect();
        return Err(Error::MalformedHeader(format!("tensor records {names:?} do not match the declared architecture")));
    }
    Ok(())
}

fn model_header(model: &HinerModel, bands: usize, bitwidth: u8, include_encoder: bool) -> StreamHeader {
    let cfg = &model.decoder.config;
    StreamHeader {
        height: cfg.target_hw.0,
        width: cfg.target_hw.1,
        bands,
        input: model.encoder.input,
        strides: cfg.strides.clone(),
        embed_shape: cfg.embed_shape,
        widths: cfg.channel_widths.clone(),
        bitwidth,
        encoder: include_encoder.then_some(model.encoder.kind),
    }
}

impl HinerBitstream {
    /// Quantizes the decoder, the per-band embeddings and optionally the encoder.
    pub fn from_parts(model: &HinerModel, embeddings: &Embeddings, bitwidth: u8, include_encoder: bool) -> Result<Self> {
        check_bitwidth(bitwidth)?;
        if model.decoder.config.kernel_size != 3 {
            return Err(Error::InvalidInput("the stream format fixes the kernel size at 3".into()));
        }
        if embeddings.shape != model.embed_shape() {
            return Err(Error::ShapeMismatch("embeddings do not match the model's embedding shape".into()));
        }
        let header = model_header(model, embeddings.bands, bitwidth, include_encoder);
        let e = embeddings.shape;
        let mut tensors =
            vec![quantize_tensor(EMBEDDINGS, &[embeddings.bands, e.c, e.h, e.w], &embeddings.data, bitwidth)?];
        for (name, shape, data) in model.decoder.tensors() {
            tensors.push(quantize_tensor(&name, &shape, data, bitwidth)?);
        }
        if include_encoder {
            let layer = &model.encoder.layer;
            tensors.push(quantize_tensor(ENCODER_WEIGHT, &[layer.outputs, layer.inputs], &layer.weight, bitwidth)?);
            tensors.push(quantize_tensor(ENCODER_BIAS, &[layer.outputs], &layer.bias, bitwidth)?);
        }
        Ok(Self { header, tensors })
    }

    /// Embeds every wavelength of `grid`, then quantizes.
    pub fn from_model(model: &HinerModel, grid: &WavelengthGrid, bitwidth: u8, include_encoder: bool) -> Result<Self> {
        Self::from_parts(model, &model.embeddings(grid)?, bitwidth, include_encoder)
    }

    fn tensor(&self, name: &str) -> Option<&QuantizedTensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        Ok(self.encode()?.0)
    }

    /// Serialized bytes and their accounting.
    pub fn encode(&self) -> Result<(Vec<u8>, StreamSizes)> {
        let mut out = Vec::new();
        write_header(&mut out, &self.header, self.tensors.len())?;
        let mut sizes = StreamSizes { header: out.len(), record_meta: 0, tables: 0, rate_payload: 0, side_payload: 0 };
        let alphabet = 1usize << self.header.bitwidth;
        let tlen = table_len(self.header.bitwidth);
        for t in &self.tensors {
            if t.spec.bitwidth != self.header.bitwidth {
                return Err(Error::InvalidInput(format!("tensor {} has a different bit width", t.name)));
            }
            let start = out.len();
            write_record_meta(&mut out, &t.name, &t.shape)?;
            out.extend_from_slice(&t.spec.min.to_le_bytes());
            out.extend_from_slice(&t.spec.scale.to_le_bytes());
            let coded = huffman_encode(&t.codes, alphabet)?;
            let mut table = coded.table.lengths().to_vec();
            table.resize(tlen, 0);
            out.extend_from_slice(&table);
            out.extend_from_slice(&coded.bit_len.to_le_bytes());
            sizes.record_meta += out.len() - start - tlen;
            sizes.tables += tlen;
            out.extend_from_slice(&coded.bytes);
            if is_rate_counted(&t.name) {
                sizes.rate_payload += coded.bytes.len();
            } else {
                sizes.side_payload += coded.bytes.len();
            }
        }
        debug_assert_eq!(sizes.total(), out.len());
        Ok((out, sizes))
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        let (header, count) = read_header(&mut r)?;
        if header.bitwidth == FLOAT_BITWIDTH {
            return Err(Error::MalformedHeader("this is a float checkpoint, not a quantized stream".into()));
        }
        let alphabet = 1usize << header.bitwidth;
        let tlen = table_len(header.bitwidth);
        let mut tensors = Vec::with_capacity(count);
        for _ in 0..count {
            let (name, shape) = read_record_meta(&mut r)?;
            let min = r.f32("tensor min")?;
            let scale = r.f32("tensor scale")?;
            if !min.is_finite() || !(scale >= 0.0) || !scale.is_finite() {
                return Err(Error::MalformedHeader(format!("tensor {name} has an invalid min/scale")));
            }
            let lengths = r.take(tlen, "code-length table")?;
            if lengths[alphabet.min(tlen)..].iter().any(|&l| l != 0) {
                return Err(Error::CorruptStream(format!("tensor {name} codes symbols beyond its bit width")));
            }
            let table = HuffmanTable::from_lengths(lengths[..alphabet].to_vec())?;
            let bit_len = r.u64("payload length")?;
            let n_bytes = usize::try_from(bit_len.div_ceil(8)).map_err(|_| Error::Truncated("payload"))?;
            let payload = r.take(n_bytes, "payload")?;
            let count: usize = shape.iter().product();
            let codes = huffman_decode(&table, payload, bit_len, count)?;
            let spec = QuantSpec { bitwidth: header.bitwidth, min, scale };
            tensors.push(QuantizedTensor { name, shape, spec, codes });
        }
        if r.pos != bytes.len() {
            return Err(Error::CorruptStream(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        let layout: Vec<_> = tensors.iter().map(|t| (t.name.clone(), t.shape.clone())).collect();
        check_layout(&header, &layout, true)?;
        Ok(Self { header, tensors })
    }

    /// Decoder with dequantized weights.
    pub fn decoder(&self) -> Result<Decoder> {
        let mut decoder = Decoder::zeros(self.header.decoder_config())?;
        let names: Vec<String> = decoder.tensors().into_iter().map(|t| t.0).collect();
        for (slot, name) in decoder.tensors_mut().into_iter().zip(names) {
            let t = self.tensor(&name).ok_or_else(|| Error::MalformedHeader(format!("missing tensor {name}")))?;
            *slot = t.dequantize_f32();
        }
        Ok(decoder)
    }

    pub fn embeddings(&self) -> Result<Embeddings> {
        let t = self.tensor(EMBEDDINGS).ok_or_else(|| Error::MalformedHeader("missing embeddings".into()))?;
        Ok(Embeddings { shape: self.header.embed_shape, bands: self.header.bands, data: t.dequantize_f32() })
    }

    /// The encoder side-channel, when present.
    pub fn encoder(&self) -> Result<Option<WavelengthEncoder>> {
        let Some(kind) = self.header.encoder else { return Ok(None) };
        let get = |n: &str| self.tensor(n).ok_or_else(|| Error::MalformedHeader(format!("missing tensor {n}")));
        let mut layer = Linear::zeros(self.header.input.dim(), self.header.embed_shape.len());
        layer.weight = get(ENCODER_WEIGHT)?.dequantize_f32();
        layer.bias = get(ENCODER_BIAS)?.dequantize_f32();
        Ok(Some(WavelengthEncoder { input: self.header.input, kind, embed_shape: self.header.embed_shape, layer }))
    }

    /// Full model (needs the encoder side-channel).
    pub fn model(&self) -> Result<Option<HinerModel>> {
        match self.encoder()? {
            Some(enc) => Ok(Some(HinerModel::new(enc, self.decoder()?)?)),
            None => Ok(None),
        }
    }

    /// Decodes every stored embedding, band-sequential and unclamped.
    pub fn decode_bands(&self) -> Result<Vec<f32>> {
        let decoder = self.decoder()?;
        let emb = self.embeddings()?;
        let mut out = Vec::with_capacity(self.header.height * self.header.width * self.header.bands);
        for b in 0..emb.bands {
            out.extend(decoder.decode(emb.band(b))?);
        }
        Ok(out)
    }

    pub fn sizes(&self) -> Result<StreamSizes> {
        Ok(self.encode()?.1)
    }
}

/// Serializes `model` with explicit per-band embeddings.
pub fn serialize(model: &HinerModel, embeddings: &Embeddings, bitwidth: u8, include_encoder: bool) -> Result<Vec<u8>> {
    HinerBitstream::from_parts(model, embeddings, bitwidth, include_encoder)?.to_bytes()
}

pub fn deserialize(bytes: &[u8]) -> Result<HinerBitstream> {
    HinerBitstream::from_bytes(bytes)
}

/// The model as the decoder side sees it after quantization, computed
/// without a serialization round trip. The encoder is quantized as well.
pub fn quantized_model(model: &HinerModel, bitwidth: u8) -> Result<HinerModel> {
    let mut out = model.clone();
    let names: Vec<(String, Vec<usize>)> = model.decoder.tensors().into_iter().map(|(n, s, _)| (n, s)).collect();
    for (slot, (name, shape)) in out.decoder.tensors_mut().into_iter().zip(names) {
        *slot = quantize_tensor(&name, &shape, slot, bitwidth)?.dequantize_f32();
    }
    let layer = &mut out.encoder.layer;
    layer.weight = quantize_tensor(ENCODER_WEIGHT, &[layer.outputs, layer.inputs], &layer.weight, bitwidth)?.dequantize_f32();
    layer.bias = quantize_tensor(ENCODER_BIAS, &[layer.outputs], &layer.bias, bitwidth)?.dequantize_f32();
    Ok(out)
}

/// Quantized embeddings for `grid`, as they would be stored.
pub fn quantized_embeddings(model: &HinerModel, grid: &WavelengthGrid, bitwidth: u8) -> Result<Embeddings> {
    let mut e = model.embeddings(grid)?;
    let s = e.shape;
    e.data = quantize_tensor(EMBEDDINGS, &[e.bands, s.c, s.h, s.w], &e.data, bitwidth)?.dequantize_f32();
    Ok(e)
}

/// Decoded cube clamped to `[0, 1]`. The stream does not record the source
/// bit depth, so the cube reports 16.
pub fn reconstruct_from_bitstream(bytes: &[u8], dims: Option<(usize, usize, usize)>) -> Result<HsiCube> {
    let stream = deserialize(bytes)?;
    if let Some(d) = dims {
        if d != stream.header.dims() {
            return Err(Error::DimensionMismatch(format!(
                "stream holds {:?}, caller expected {d:?}",
                stream.header.dims()
            )));
        }
    }
    let mut data = stream.decode_bands()?;
    for v in &mut data {
        *v = v.clamp(0.0, 1.0);
    }
    let (h, w, c) = stream.header.dims();
    HsiCube::new(data, c, h, w, 16)
}

/// Bits per pixel per band.
pub fn bpppb(bytes: usize, dims: (usize, usize, usize)) -> f64 {
    8.0 * bytes as f64 / (dims.0 * dims.1 * dims.2) as f64
}

/// Compression ratio against a raw source of `source_bitdepth` bits.
pub fn compression_ratio(source_bitdepth: u32, bpppb: f64) -> f64 {
    source_bitdepth as f64 / bpppb
}

/// One rate-distortion operating point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RdPoint {
    pub label: String,
    pub bpppb: f64,
    pub mean_psnr: f64,
    pub compression_ratio: f64,
}

impl RdPoint {
    pub const CSV_HEADER: &'static str = "label,bpppb,mean_psnr,compression_ratio";

    pub fn csv_row(&self) -> String {
        format!("{},{},{},{}", self.label, self.bpppb, self.mean_psnr, self.compression_ratio)
    }
}

/// Unquantized snapshot of encoder and decoder, used for training checkpoints.
pub fn write_checkpoint(model: &HinerModel) -> Result<Vec<u8>> {
    let header = model_header(model, 1, FLOAT_BITWIDTH, true);
    let layer = &model.encoder.layer;
    let mut records: Vec<(String, Vec<usize>, &[f32])> = model.decoder.tensors();
    records.push((ENCODER_WEIGHT.into(), vec![layer.outputs, layer.inputs], &layer.weight));
    records.push((ENCODER_BIAS.into(), vec![layer.outputs], &layer.bias));
    let mut out = Vec::new();
    write_header(&mut out, &header, records.len())?;
    for (name, shape, data) in records {
        write_record_meta(&mut out, &name, &shape)?;
        out.extend_from_slice(&(data.len() as u64 * 32).to_le_bytes());
        for v in data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<HinerModel> {
    let mut r = Reader { bytes, pos: 0 };
    let (header, count) = read_header(&mut r)?;
    if header.bitwidth != FLOAT_BITWIDTH {
        return Err(Error::MalformedHeader("not a float checkpoint".into()));
    }
    let mut layout = Vec::with_capacity(count);
    let mut values = Vec::with_capacity(count);
    for _ in 0..count {
        let (name, shape) = read_record_meta(&mut r)?;
        let bit_len = r.u64("payload length")?;
        let n = shape.iter().product::<usize>();
        if bit_len != n as u64 * 32 {
            return Err(Error::CorruptStream(format!("tensor {name} declares {bit_len} bits for {n} floats")));
        }
        let raw = r.take(n * 4, "payload")?;
        values.push(raw.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap())).collect::<Vec<_>>());
        layout.push((name, shape));
    }
    if r.pos != bytes.len() {
        return Err(Error::CorruptStream(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    check_layout(&header, &layout, false)?;
    let kind = header.encoder.ok_or_else(|| Error::MalformedHeader("checkpoint lacks an encoder".into()))?;
    let mut decoder = Decoder::zeros(header.decoder_config())?;
    let mut values = values.into_iter();
    for slot in decoder.tensors_mut() {
        *slot = values.next().unwrap();
    }
    let mut layer = Linear::zeros(header.input.dim(), header.embed_shape.len());
    layer.weight = values.next().unwrap();
    layer.bias = values.next().unwrap();
    let encoder = WavelengthEncoder { input: header.input, kind, embed_shape: header.embed_shape, layer };
    HinerModel::new(encoder, decoder)
}
