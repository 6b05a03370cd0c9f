#include "tumorseg/unet.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "tumorseg/errors.hpp"
#include "tumorseg/rng.hpp"

namespace tumorseg {

namespace {

struct DoubleConvBlock {
  DoubleConvBlock(int cin, int cout) : c1(3, 3, cin, cout), c2(3, 3, cout, cout) {}
  Conv2d c1;
  Conv2d c2;

  Tensor forward(const Tensor& x, UNet::DoubleConvCache& cache) const {
    cache.x = x;
    cache.r1 = relu(c1.forward(x));
    cache.r2 = relu(c2.forward(cache.r1));
    return cache.r2;
  }

  Tensor backward(const UNet::DoubleConvCache& cache, const Tensor& dout) {
    const Tensor db2 = relu_backward(cache.r2, dout);
    const Tensor dr1 = c2.backward(cache.r1, db2);
    const Tensor da = relu_backward(cache.r1, dr1);
    return c1.backward(cache.x, da);
  }
};

void add_into(Tensor& dst, const Tensor& src) {
  if (!dst.same_shape(src)) throw ShapeMismatchError("gradient accumulation mismatch");
  for (std::int64_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

void init_conv(Tensor& w, Tensor& b, int fan_in, double gain, Rng& rng) {
  const double std_dev = std::sqrt(gain / fan_in);
  for (std::int64_t i = 0; i < w.size(); ++i) w[i] = rng.normal() * std_dev;
  // Small random biases rather than zeros: with zero biases, units whose
  // receptive field is relu-dead sit exactly on the activation kink, which
  // both stalls those units and makes the loss non-differentiable at init.
  for (std::int64_t i = 0; i < b.size(); ++i) b[i] = rng.normal() * (0.1 * std_dev);
}

// --- checkpoint archive primitives (little-endian host assumed) ---

constexpr char kCheckpointMagic[8] = {'T', 'S', 'E', 'G', 'C', 'K', 'P', '1'};

void write_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
std::uint32_t read_u32(std::istream& is) {
  std::uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}
void write_string(std::ostream& os, const std::string& s) {
  write_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}
std::string read_string(std::istream& is) {
  const std::uint32_t n = read_u32(is);
  if (n > (1u << 20)) throw CorruptFileError("checkpoint string too long");
  std::string s(n, '\0');
  is.read(s.data(), n);
  return s;
}
void write_map(std::ostream& os, const std::map<std::string, std::string>& m) {
  write_u32(os, static_cast<std::uint32_t>(m.size()));
  for (const auto& [k, v] : m) {
    write_string(os, k);
    write_string(os, v);
  }
}
std::map<std::string, std::string> read_map(std::istream& is) {
  std::map<std::string, std::string> m;
  const std::uint32_t n = read_u32(is);
  for (std::uint32_t i = 0; i < n; ++i) {
    std::string k = read_string(is);
    m[k] = read_string(is);
  }
  return m;
}

}  // namespace

struct UNet::Blocks {
  std::vector<DoubleConvBlock> enc;
  std::vector<DoubleConvBlock> dec;
  std::vector<TransposedConv2> up;
  DoubleConvBlock bottleneck;
  Conv2d head;

  Blocks(const UNetConfig& cfg)
      : bottleneck(cfg.encoder_widths().back(), cfg.bottleneck_width()),
        head(1, 1, cfg.base_features, cfg.num_classes) {
    const auto widths = cfg.encoder_widths();
    int cin = cfg.in_channels;
    for (int i = 0; i < cfg.depth; ++i) {
      enc.emplace_back(cin, widths[static_cast<std::size_t>(i)]);
      cin = widths[static_cast<std::size_t>(i)];
    }
    for (int i = 0; i < cfg.depth; ++i) {
      const int wi = widths[static_cast<std::size_t>(i)];
      const int deeper = (i == cfg.depth - 1) ? cfg.bottleneck_width() : widths[i + 1];
      up.emplace_back(deeper, wi);
      dec.emplace_back(2 * wi, wi);
    }
  }
};

void UNetConfig::validate() const {
  if (in_channels < 1) throw ConfigInvalidError("in_channels must be >= 1");
  if (num_classes < 2) throw ConfigInvalidError("num_classes must be >= 2");
  if (base_features < 1) throw ConfigInvalidError("base_features must be >= 1");
  if (depth < 1) throw ConfigInvalidError("depth must be >= 1");
  const int factor = 1 << depth;
  if (input_height < factor || input_width < factor || input_height % factor != 0 ||
      input_width % factor != 0) {
    throw ConfigInvalidError("input size " + std::to_string(input_height) + "x" +
                             std::to_string(input_width) + " must be divisible by 2^depth (" +
                             std::to_string(factor) + ")");
  }
}

std::vector<int> UNetConfig::encoder_widths() const {
  std::vector<int> widths(static_cast<std::size_t>(depth));
  for (int i = 0; i < depth; ++i) widths[static_cast<std::size_t>(i)] = base_features << i;
  return widths;
}

int UNetConfig::bottleneck_width() const { return base_features << depth; }

UNet::UNet(UNetConfig config) : config_(config) {
  config_.validate();
  blocks_ = std::make_unique<Blocks>(config_);
  register_params();
  init_weights();
}

UNet::UNet(UNet&&) noexcept = default;
UNet& UNet::operator=(UNet&&) noexcept = default;
UNet::~UNet() = default;

void UNet::register_params() {
  params_.clear();
  auto add = [&](const std::string& name, Tensor& value, Tensor& grad) {
    params_.push_back({name, &value, &grad});
  };
  for (int i = 0; i < config_.depth; ++i) {
    auto& blk = blocks_->enc[static_cast<std::size_t>(i)];
    const std::string p = "enc" + std::to_string(i);
    add(p + ".conv1.weight", blk.c1.w, blk.c1.dw);
    add(p + ".conv1.bias", blk.c1.b, blk.c1.db);
    add(p + ".conv2.weight", blk.c2.w, blk.c2.dw);
    add(p + ".conv2.bias", blk.c2.b, blk.c2.db);
  }
  add("bottleneck.conv1.weight", blocks_->bottleneck.c1.w, blocks_->bottleneck.c1.dw);
  add("bottleneck.conv1.bias", blocks_->bottleneck.c1.b, blocks_->bottleneck.c1.db);
  add("bottleneck.conv2.weight", blocks_->bottleneck.c2.w, blocks_->bottleneck.c2.dw);
  add("bottleneck.conv2.bias", blocks_->bottleneck.c2.b, blocks_->bottleneck.c2.db);
  for (int i = config_.depth - 1; i >= 0; --i) {
    auto& up = blocks_->up[static_cast<std::size_t>(i)];
    auto& blk = blocks_->dec[static_cast<std::size_t>(i)];
    const std::string p = "dec" + std::to_string(i);
    add(p + ".up.weight", up.w, up.dw);
    add(p + ".up.bias", up.b, up.db);
    add(p + ".conv1.weight", blk.c1.w, blk.c1.dw);
    add(p + ".conv1.bias", blk.c1.b, blk.c1.db);
    add(p + ".conv2.weight", blk.c2.w, blk.c2.dw);
    add(p + ".conv2.bias", blk.c2.b, blk.c2.db);
  }
  add("head.weight", blocks_->head.w, blocks_->head.dw);
  add("head.bias", blocks_->head.b, blocks_->head.db);
}

void UNet::init_weights() {
  Rng rng(Rng::mix(config_.init_seed, 0xC0FFEE));
  for (int i = 0; i < config_.depth; ++i) {
    auto& blk = blocks_->enc[static_cast<std::size_t>(i)];
    init_conv(blk.c1.w, blk.c1.b, 9 * blk.c1.cin, 2.0, rng);
    init_conv(blk.c2.w, blk.c2.b, 9 * blk.c2.cin, 2.0, rng);
  }
  init_conv(blocks_->bottleneck.c1.w, blocks_->bottleneck.c1.b,
            9 * blocks_->bottleneck.c1.cin, 2.0, rng);
  init_conv(blocks_->bottleneck.c2.w, blocks_->bottleneck.c2.b,
            9 * blocks_->bottleneck.c2.cin, 2.0, rng);
  for (int i = config_.depth - 1; i >= 0; --i) {
    auto& up = blocks_->up[static_cast<std::size_t>(i)];
    auto& blk = blocks_->dec[static_cast<std::size_t>(i)];
    init_conv(up.w, up.b, up.cin, 2.0, rng);
    init_conv(blk.c1.w, blk.c1.b, 9 * blk.c1.cin, 2.0, rng);
    init_conv(blk.c2.w, blk.c2.b, 9 * blk.c2.cin, 2.0, rng);
  }
  init_conv(blocks_->head.w, blocks_->head.b, blocks_->head.cin, 1.0, rng);
}

void UNet::zero_grad() {
  for (auto& p : params_) p.grad->fill(0.0);
}

Tensor UNet::forward(const Tensor& inputs) const {
  Cache scratch;
  return forward(inputs, scratch);
}

Tensor UNet::forward(const Tensor& inputs, Cache& cache) const {
  if (inputs.rank() != 4 || inputs.dim(1) != config_.input_height ||
      inputs.dim(2) != config_.input_width || inputs.dim(3) != config_.in_channels) {
    throw ShapeMismatchError("model expects (B," + std::to_string(config_.input_height) +
                             "," + std::to_string(config_.input_width) + "," +
                             std::to_string(config_.in_channels) + "), got " +
                             inputs.shape_str());
  }
  const int depth = config_.depth;
  cache.enc.resize(static_cast<std::size_t>(depth));
  cache.pool_argmax.resize(static_cast<std::size_t>(depth));
  cache.pool_in_shape.resize(static_cast<std::size_t>(depth));
  cache.up_in.resize(static_cast<std::size_t>(depth));
  cache.dec.resize(static_cast<std::size_t>(depth));

  Tensor cur = inputs;
  for (int i = 0; i < depth; ++i) {
    const Tensor out =
        blocks_->enc[static_cast<std::size_t>(i)].forward(cur, cache.enc[i]);
    cache.pool_in_shape[i] = out.shape();
    cur = maxpool2(out, cache.pool_argmax[i]);
  }
  cur = blocks_->bottleneck.forward(cur, cache.bottleneck);
  for (int i = depth - 1; i >= 0; --i) {
    cache.up_in[i] = cur;
    const Tensor up_out = blocks_->up[static_cast<std::size_t>(i)].forward(cur);
    const Tensor cat = concat_channels(cache.enc[i].r2, up_out);
    cur = blocks_->dec[static_cast<std::size_t>(i)].forward(cat, cache.dec[i]);
  }
  cache.head_in = cur;
  cache.probs = softmax_channels(blocks_->head.forward(cur));
  return cache.probs;
}

void UNet::backward(const Cache& cache, const Tensor& dlogits) {
  const int depth = config_.depth;
  const auto widths = config_.encoder_widths();

  Tensor d = blocks_->head.backward(cache.head_in, dlogits);
  std::vector<Tensor> skip_grads(static_cast<std::size_t>(depth));
  for (int i = 0; i < depth; ++i) {
    const Tensor dcat = blocks_->dec[static_cast<std::size_t>(i)].backward(cache.dec[i], d);
    Tensor dskip, dup_out;
    split_channels_grad(dcat, widths[static_cast<std::size_t>(i)], dskip, dup_out);
    skip_grads[static_cast<std::size_t>(i)] = std::move(dskip);
    d = blocks_->up[static_cast<std::size_t>(i)].backward(cache.up_in[i], dup_out);
  }
  d = blocks_->bottleneck.backward(cache.bottleneck, d);
  for (int i = depth - 1; i >= 0; --i) {
    Tensor dpool_in = maxpool2_backward(d, cache.pool_argmax[i], cache.pool_in_shape[i]);
    add_into(dpool_in, skip_grads[static_cast<std::size_t>(i)]);
    d = blocks_->enc[static_cast<std::size_t>(i)].backward(cache.enc[i], dpool_in);
  }
}

std::vector<std::pair<std::string, const Tensor*>> UNet::named_parameters() const {
  std::vector<std::pair<std::string, const Tensor*>> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.emplace_back(p.name, p.value);
  return out;
}

std::int64_t UNet::count_parameters() const {
  std::int64_t total = 0;
  for (const auto& p : params_) total += p.value->size();
  return total;
}

void UNet::save_checkpoint(const std::filesystem::path& path,
                           const std::map<std::string, std::string>& metadata) const {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path.string());
  os.write(kCheckpointMagic, sizeof(kCheckpointMagic));

  std::map<std::string, std::string> cfg;
  cfg["in_channels"] = std::to_string(config_.in_channels);
  cfg["num_classes"] = std::to_string(config_.num_classes);
  cfg["base_features"] = std::to_string(config_.base_features);
  cfg["depth"] = std::to_string(config_.depth);
  cfg["input_height"] = std::to_string(config_.input_height);
  cfg["input_width"] = std::to_string(config_.input_width);
  cfg["init_seed"] = std::to_string(config_.init_seed);
  write_map(os, cfg);
  write_map(os, metadata);

  write_u32(os, static_cast<std::uint32_t>(params_.size()));
  for (const auto& p : params_) {
    write_string(os, p.name);
    write_u32(os, static_cast<std::uint32_t>(p.value->rank()));
    for (int d = 0; d < p.value->rank(); ++d) {
      write_u32(os, static_cast<std::uint32_t>(p.value->dim(d)));
    }
    os.write(reinterpret_cast<const char*>(p.value->data()),
             static_cast<std::streamsize>(sizeof(double) * p.value->size()));
  }
  if (!os) throw IoError("checkpoint write failed: " + path.string());
}

UNet UNet::load_checkpoint(const std::filesystem::path& path,
                           std::map<std::string, std::string>* metadata) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path.string());
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw CorruptFileError("not a tumorseg checkpoint: " + path.string());
  }
  const auto cfg_map = read_map(is);
  const auto meta = read_map(is);
  if (metadata) *metadata = meta;

  UNetConfig cfg;
  try {
    cfg.in_channels = std::stoi(cfg_map.at("in_channels"));
    cfg.num_classes = std::stoi(cfg_map.at("num_classes"));
    cfg.base_features = std::stoi(cfg_map.at("base_features"));
    cfg.depth = std::stoi(cfg_map.at("depth"));
    cfg.input_height = std::stoi(cfg_map.at("input_height"));
    cfg.input_width = std::stoi(cfg_map.at("input_width"));
    cfg.init_seed = std::stoull(cfg_map.at("init_seed"));
  } catch (const std::exception&) {
    throw CorruptFileError("checkpoint config incomplete: " + path.string());
  }

  UNet model(cfg);
  const std::uint32_t n = read_u32(is);
  if (n != model.params_.size()) {
    throw CorruptFileError("checkpoint parameter count mismatch: " + path.string());
  }
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::string name = read_string(is);
    auto& p = model.params_[i];
    if (name != p.name) {
      throw CorruptFileError("checkpoint parameter order mismatch at " + name);
    }
    const std::uint32_t rank = read_u32(is);
    if (rank != static_cast<std::uint32_t>(p.value->rank())) {
      throw CorruptFileError("checkpoint tensor rank mismatch at " + name);
    }
    for (std::uint32_t d = 0; d < rank; ++d) {
      if (read_u32(is) != static_cast<std::uint32_t>(p.value->dim(static_cast<int>(d)))) {
        throw CorruptFileError("checkpoint tensor shape mismatch at " + name);
      }
    }
    is.read(reinterpret_cast<char*>(p.value->data()),
            static_cast<std::streamsize>(sizeof(double) * p.value->size()));
  }
  if (!is) throw CorruptFileError("checkpoint truncated: " + path.string());
  return model;
}

}  // namespace tumorseg
