#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "tumorseg/layers.hpp"
#include "tumorseg/tensor.hpp"

namespace tumorseg {

// Anything that maps a batch of preprocessed inputs to per-pixel class
// probabilities. Lets evaluation and prediction run against stand-in models
// in tests as well as the real network.
struct Predictor {
  virtual ~Predictor() = default;
  virtual Tensor predict(const Tensor& inputs) const = 0;
  virtual std::pair<int, int> input_size() const = 0;
  virtual int in_channels() const = 0;
  virtual int num_classes() const = 0;
};

struct UNetConfig {
  int in_channels = 2;
  int num_classes = 4;
  int base_features = 32;
  int depth = 4;  // number of down-sampling steps
  int input_height = 128;
  int input_width = 128;
  std::uint64_t init_seed = 0;

  void validate() const;  // ConfigInvalidError
  // Feature widths double per level: [base, 2*base, ...], depth entries.
  std::vector<int> encoder_widths() const;
  int bottleneck_width() const;
};

// Encoder/decoder segmentation network: per level two same-padded 3x3
// convolutions with ReLU, 2x2 max pooling down, 2x2 transposed convolutions
// up with skip concatenation, and a 1x1 convolution head followed by a
// per-pixel softmax.
class UNet : public Predictor {
 public:
  explicit UNet(UNetConfig config);

  const UNetConfig& config() const { return config_; }

  // Saved forward activations for one batch; required by backward.
  struct DoubleConvCache {
    Tensor x;   // block input
    Tensor r1;  // first relu output
    Tensor r2;  // second relu output (the block output)
  };
  struct Cache {
    std::vector<DoubleConvCache> enc;
    std::vector<std::vector<std::int64_t>> pool_argmax;
    std::vector<std::vector<int>> pool_in_shape;
    DoubleConvCache bottleneck;
    std::vector<Tensor> up_in;
    std::vector<DoubleConvCache> dec;
    Tensor head_in;
    Tensor probs;
  };

  // Inference: (B, h, w, in_channels) -> (B, h, w, num_classes) probabilities.
  Tensor forward(const Tensor& inputs) const;
  Tensor forward(const Tensor& inputs, Cache& cache) const;

  // Backpropagates dL/dlogits (the pre-softmax gradient) and accumulates
  // parameter gradients.
  void backward(const Cache& cache, const Tensor& dlogits);
  void zero_grad();

  struct Param {
    std::string name;
    Tensor* value;
    Tensor* grad;
  };
  const std::vector<Param>& parameters() { return params_; }
  std::vector<std::pair<std::string, const Tensor*>> named_parameters() const;

  std::int64_t count_parameters() const;

  // Self-describing archive: config, free-form metadata, then every named
  // parameter tensor, bit-exact on round trip.
  void save_checkpoint(const std::filesystem::path& path,
                       const std::map<std::string, std::string>& metadata = {}) const;
  static UNet load_checkpoint(const std::filesystem::path& path,
                              std::map<std::string, std::string>* metadata = nullptr);

  // Predictor interface.
  Tensor predict(const Tensor& inputs) const override { return forward(inputs); }
  std::pair<int, int> input_size() const override {
    return {config_.input_height, config_.input_width};
  }
  int in_channels() const override { return config_.in_channels; }
  int num_classes() const override { return config_.num_classes; }

  UNet(UNet&&) noexcept;
  UNet& operator=(UNet&&) noexcept;
  UNet(const UNet&) = delete;
  UNet& operator=(const UNet&) = delete;
  ~UNet();

 private:
  struct Blocks;
  void register_params();
  void init_weights();

  UNetConfig config_;
  std::unique_ptr<Blocks> blocks_;
  std::vector<Param> params_;
};

}  // namespace tumorseg
