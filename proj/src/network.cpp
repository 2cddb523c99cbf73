#include "otomech/network.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <limits>
#include <tuple>

#include "otomech/error.hpp"
#include "otomech/simd/kernels.hpp"

namespace otomech {

using nlohmann::json;

struct Shape {
  std::size_t h = 0, w = 0, c = 0;
  std::size_t size() const { return h * w * c; }
};

struct NetworkEmbedder::Layer {
  enum class Kind { Conv2d, MaxPool2d, Flatten, Dense } kind;
  std::string name;
  Shape in, out;
  bool relu = false;
  std::size_t kh = 0, kw = 0;  // conv kernel or pool window
  std::vector<float> weights;  // conv: [kh][kw][cin][cout]; dense: [out][in]
  std::vector<float> bias;
};

namespace {

using Layer = NetworkEmbedder::Layer;

std::vector<float> run_conv(const Layer& l, const std::vector<float>& x) {
  const Shape& in = l.in;
  const std::size_t co = l.out.c;
  const std::ptrdiff_t ph = static_cast<std::ptrdiff_t>((l.kh - 1) / 2);
  const std::ptrdiff_t pw = static_cast<std::ptrdiff_t>((l.kw - 1) / 2);
  std::vector<float> y(l.out.size());
  for (std::size_t h = 0; h < in.h; ++h) {
    for (std::size_t w = 0; w < in.w; ++w) {
      float* dst = y.data() + (h * in.w + w) * co;
      std::copy(l.bias.begin(), l.bias.end(), dst);
      for (std::size_t dh = 0; dh < l.kh; ++dh) {
        const std::ptrdiff_t sh = static_cast<std::ptrdiff_t>(h + dh) - ph;
        if (sh < 0 || sh >= static_cast<std::ptrdiff_t>(in.h)) continue;
        for (std::size_t dw = 0; dw < l.kw; ++dw) {
          const std::ptrdiff_t sw = static_cast<std::ptrdiff_t>(w + dw) - pw;
          if (sw < 0 || sw >= static_cast<std::ptrdiff_t>(in.w)) continue;
          const float* src = x.data() + (sh * in.w + sw) * in.c;
          const float* k = l.weights.data() + (dh * l.kw + dw) * in.c * co;
          for (std::size_t ci = 0; ci < in.c; ++ci) {
            const float v = src[ci];
            const float* krow = k + ci * co;
            for (std::size_t o = 0; o < co; ++o) dst[o] += v * krow[o];
          }
        }
      }
    }
  }
  return y;
}

std::vector<float> run_pool(const Layer& l, const std::vector<float>& x) {
  std::vector<float> y(l.out.size());
  const std::size_t c = l.in.c;
  for (std::size_t h = 0; h < l.out.h; ++h)
    for (std::size_t w = 0; w < l.out.w; ++w)
      for (std::size_t ch = 0; ch < c; ++ch) {
        float m = -std::numeric_limits<float>::infinity();
        for (std::size_t dh = 0; dh < l.kh; ++dh)
          for (std::size_t dw = 0; dw < l.kw; ++dw)
            m = std::max(m, x[((h * l.kh + dh) * l.in.w + (w * l.kw + dw)) * c + ch]);
        y[(h * l.out.w + w) * c + ch] = m;
      }
  return y;
}

std::vector<float> run_dense(const Layer& l, const std::vector<float>& x) {
  std::vector<float> y(l.out.size());
  simd::active_kernels().matvec_f32(l.weights.data(), x.data(), y.data(), l.out.size(), l.in.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += l.bias[i];
  return y;
}

class WeightCursor {
 public:
  explicit WeightCursor(const std::vector<float>& blob) : blob_(blob) {}
  std::vector<float> take(std::size_t n, const std::string& layer) {
    if (n > blob_.size() - pos_)
      throw Error(ErrorCode::CorruptStream, "weight blob too short at layer '" + layer + "'");
    std::vector<float> out(blob_.begin() + pos_, blob_.begin() + pos_ + n);
    pos_ += n;
    return out;
  }
  bool exhausted() const { return pos_ == blob_.size(); }

 private:
  const std::vector<float>& blob_;
  std::size_t pos_ = 0;
};

std::pair<std::size_t, std::size_t> pair_field(const json& j, const char* key) {
  const auto& v = j.at(key);
  return {v.at(0).get<std::size_t>(), v.at(1).get<std::size_t>()};
}

bool relu_of(const json& j) {
  const std::string act = j.value("activation", "linear");
  if (act == "relu") return true;
  if (act == "linear" || act == "none") return false;
  throw Error(ErrorCode::UnsupportedFormat, "unsupported activation '" + act + "'");
}

}  // namespace

NetworkEmbedder::NetworkEmbedder(std::string id, std::vector<Layer> layers,
                                 std::vector<std::size_t> output_layers, bool concat, std::size_t dimension)
    : id_(std::move(id)),
      layers_(std::move(layers)),
      output_layers_(std::move(output_layers)),
      concat_(concat),
      dimension_(dimension) {}

NetworkEmbedder::~NetworkEmbedder() = default;

std::shared_ptr<const NetworkEmbedder> NetworkEmbedder::from_parts(const std::string& descriptor_json,
                                                                   std::vector<float> blob) {
  json d;
  try {
    d = json::parse(descriptor_json);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptStream, std::string("network descriptor is not valid JSON: ") + e.what());
  }
  try {
    if (d.value("format", "") != "otomech-network" || d.value("version", 0) != 1)
      throw Error(ErrorCode::UnsupportedFormat, "descriptor is not an otomech-network v1 file");

    Shape shape{mel::kFrames, mel::kBands, 1};
    WeightCursor cursor(blob);
    std::vector<Layer> layers;
    for (const auto& jl : d.at("layers")) {
      Layer l;
      l.name = jl.at("name").get<std::string>();
      const std::string type = jl.at("type").get<std::string>();
      l.in = shape;
      if (type == "conv2d") {
        l.kind = Layer::Kind::Conv2d;
        std::tie(l.kh, l.kw) = pair_field(jl, "kernel");
        if (l.kh % 2 == 0 || l.kw % 2 == 0)
          throw Error(ErrorCode::UnsupportedFormat, "conv2d '" + l.name + "' needs an odd kernel");
        l.out = {shape.h, shape.w, jl.at("filters").get<std::size_t>()};
        l.relu = relu_of(jl);
        l.weights = cursor.take(l.kh * l.kw * shape.c * l.out.c, l.name);
        l.bias = cursor.take(l.out.c, l.name);
      } else if (type == "maxpool2d") {
        l.kind = Layer::Kind::MaxPool2d;
        std::tie(l.kh, l.kw) = pair_field(jl, "pool");
        if (l.kh == 0 || l.kw == 0) throw Error(ErrorCode::UnsupportedFormat, "empty pool window");
        l.out = {shape.h / l.kh, shape.w / l.kw, shape.c};
      } else if (type == "flatten") {
        l.kind = Layer::Kind::Flatten;
        l.out = {1, 1, shape.size()};
      } else if (type == "dense") {
        l.kind = Layer::Kind::Dense;
        if (shape.h != 1 || shape.w != 1)
          throw Error(ErrorCode::UnsupportedFormat, "dense '" + l.name + "' must follow flatten");
        l.out = {1, 1, jl.at("units").get<std::size_t>()};
        l.relu = relu_of(jl);
        // Stored [in][out]; transposed so each output is one contiguous dot.
        const auto stored = cursor.take(shape.c * l.out.c, l.name);
        l.weights.resize(stored.size());
        for (std::size_t i = 0; i < shape.c; ++i)
          for (std::size_t o = 0; o < l.out.c; ++o) l.weights[o * shape.c + i] = stored[i * l.out.c + o];
        l.bias = cursor.take(l.out.c, l.name);
      } else {
        throw Error(ErrorCode::UnsupportedFormat, "unsupported layer type '" + type + "'");
      }
      if (l.out.size() == 0) throw Error(ErrorCode::UnsupportedFormat, "layer '" + l.name + "' has empty output");
      shape = l.out;
      layers.push_back(std::move(l));
    }
    if (!cursor.exhausted()) throw Error(ErrorCode::CorruptStream, "weight blob has unused trailing values");
    if (layers.empty()) throw Error(ErrorCode::UnsupportedFormat, "network has no layers");

    const std::string combine = d.value("combine", "concat");
    if (combine != "concat" && combine != "sum")
      throw Error(ErrorCode::UnsupportedFormat, "combine must be 'concat' or 'sum'");
    std::vector<std::string> output_names;
    if (d.contains("outputs")) output_names = d.at("outputs").get<std::vector<std::string>>();
    else output_names.push_back(layers.back().name);
    if (output_names.empty()) throw Error(ErrorCode::UnsupportedFormat, "outputs list is empty");

    std::vector<std::size_t> outputs;
    std::size_t dimension = 0;
    for (const auto& name : output_names) {
      const auto it = std::find_if(layers.begin(), layers.end(), [&](const Layer& l) { return l.name == name; });
      if (it == layers.end()) throw Error(ErrorCode::UnsupportedFormat, "unknown output layer '" + name + "'");
      const std::size_t n = it->out.size();
      if (combine == "sum" && dimension != 0 && n != dimension)
        throw Error(ErrorCode::DimensionMismatch, "summed outputs must have equal sizes");
      dimension = combine == "sum" ? n : dimension + n;
      outputs.push_back(static_cast<std::size_t>(it - layers.begin()));
    }

    std::string joined;
    for (const auto& n : output_names) joined += (joined.empty() ? "" : "+") + n;
    std::string id = "external:" + d.value("name", std::string("network")) + ";outputs=" + joined +
                     ";combine=" + combine;
    return std::make_shared<const NetworkEmbedder>(std::move(id), std::move(layers), std::move(outputs),
                                                   combine == "concat", dimension);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::UnsupportedFormat, std::string("bad network descriptor: ") + e.what());
  }
}

std::shared_ptr<const NetworkEmbedder> NetworkEmbedder::load(const std::filesystem::path& descriptor) {
  const auto text = read_file_bytes(descriptor);
  const std::string json_text(text.begin(), text.end());
  std::filesystem::path weights_path;
  try {
    weights_path = descriptor.parent_path() / json::parse(json_text).at("weights").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::UnsupportedFormat, std::string("bad network descriptor: ") + e.what());
  }
  const auto raw = read_file_bytes(weights_path);
  if (raw.size() % sizeof(float) != 0)
    throw Error(ErrorCode::CorruptStream, "weight blob size is not a multiple of 4 bytes");
  std::vector<float> blob(raw.size() / sizeof(float));
  std::memcpy(blob.data(), raw.data(), raw.size());
  return from_parts(json_text, std::move(blob));
}

std::vector<double> NetworkEmbedder::embed_slice(const MelPatch& patch) const {
  std::vector<std::vector<float>> activations;
  activations.reserve(layers_.size());
  const std::vector<float>* x = &patch.values;
  for (const auto& l : layers_) {
    std::vector<float> y;
    switch (l.kind) {
      case Layer::Kind::Conv2d: y = run_conv(l, *x); break;
      case Layer::Kind::MaxPool2d: y = run_pool(l, *x); break;
      case Layer::Kind::Flatten: y = *x; break;
      case Layer::Kind::Dense: y = run_dense(l, *x); break;
    }
    if (l.relu)
      for (float& v : y) v = std::max(v, 0.0f);
    activations.push_back(std::move(y));
    x = &activations.back();
  }

  std::vector<double> out;
  out.reserve(dimension_);
  if (concat_) {
    for (std::size_t i : output_layers_) out.insert(out.end(), activations[i].begin(), activations[i].end());
  } else {
    out.assign(dimension_, 0.0);
    for (std::size_t i : output_layers_)
      for (std::size_t k = 0; k < dimension_; ++k) out[k] += activations[i][k];
  }
  return out;
}

}  // namespace otomech
