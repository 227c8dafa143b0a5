#include "paramlock/architecture.hpp"

#include <charconv>
#include <optional>
#include <sstream>

namespace paramlock {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::vector<std::string_view> split_tokens(std::string_view line) {
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) tokens.push_back(line.substr(start, i - start));
  }
  return tokens;
}

std::optional<int> to_positive_int(std::string_view s) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || v <= 0) return std::nullopt;
  return v;
}

std::optional<int> to_nonnegative_int(std::string_view s) {
  if (s == "0") return 0;
  return to_positive_int(s);
}

const char* activation_name(Activation a) { return a == Activation::kRelu ? "relu" : "linear"; }

class LineParser {
 public:
  LineParser(std::size_t line_no, std::vector<std::string_view> tokens)
      : line_(line_no), tokens_(std::move(tokens)) {}

  [[noreturn]] void fail(std::string_view token, const std::string& what) const {
    throw ArchParseError(line_, std::string(token), what);
  }

  bool done() const { return pos_ >= tokens_.size(); }
  std::string_view peek() const { return done() ? std::string_view() : tokens_[pos_]; }

  std::string_view next(const char* expected) {
    if (done()) fail("<end of line>", std::string("expected ") + expected);
    return tokens_[pos_++];
  }

  int positive(const char* expected) {
    auto tok = next(expected);
    auto v = to_positive_int(tok);
    if (!v) fail(tok, std::string("expected ") + expected);
    return *v;
  }

  // "AxB" -> (A, B); with three parts -> (A, B, C).
  std::vector<int> dims(const char* expected, std::size_t count) {
    auto tok = next(expected);
    std::vector<int> out;
    std::size_t start = 0;
    while (true) {
      const auto x = tok.find('x', start);
      auto part = tok.substr(start, x == std::string_view::npos ? std::string_view::npos : x - start);
      auto v = to_positive_int(part);
      if (!v) fail(tok, std::string("expected ") + expected);
      out.push_back(*v);
      if (x == std::string_view::npos) break;
      start = x + 1;
    }
    if (out.size() != count) fail(tok, std::string("expected ") + expected);
    return out;
  }

  void expect_end() {
    if (!done()) fail(tokens_[pos_], "unexpected token");
  }

 private:
  std::size_t line_;
  std::vector<std::string_view> tokens_;
  std::size_t pos_ = 0;
};

std::optional<Activation> parse_activation(std::string_view tok) {
  if (tok == "relu") return Activation::kRelu;
  if (tok == "linear") return Activation::kLinear;
  return std::nullopt;
}

LayerSpec parse_layer(LineParser& p, std::string_view kind) {
  if (kind == "conv") {
    Conv2D c;
    c.out_channels = p.positive("output channel count");
    auto k = p.dims("kernel size HxW", 2);
    c.kernel_h = k[0];
    c.kernel_w = k[1];
    bool seen_stride = false, seen_pad = false, seen_act = false;
    while (!p.done()) {
      auto tok = p.next("conv option");
      if (tok == "stride" && !seen_stride) {
        c.stride = p.positive("stride");
        seen_stride = true;
      } else if (tok == "pad" && !seen_pad) {
        auto v = p.next("padding (same, valid or a count)");
        if (v == "same") {
          c.padding = {Padding::Kind::kSame, 0};
        } else if (v == "valid") {
          c.padding = {Padding::Kind::kValid, 0};
        } else if (auto n = to_nonnegative_int(v)) {
          c.padding = {Padding::Kind::kExplicit, *n};
        } else {
          p.fail(v, "expected padding (same, valid or a count)");
        }
        seen_pad = true;
      } else if (auto a = parse_activation(tok); a && !seen_act) {
        c.activation = *a;
        seen_act = true;
      } else {
        p.fail(tok, "unexpected conv option");
      }
    }
    return c;
  }
  if (kind == "maxpool") {
    MaxPool2D m;
    auto k = p.dims("pool size HxW", 2);
    m.pool_h = k[0];
    m.pool_w = k[1];
    m.stride = m.pool_h;
    if (!p.done()) {
      auto tok = p.next("stride");
      if (tok != "stride") p.fail(tok, "unexpected maxpool option");
      m.stride = p.positive("stride");
    }
    p.expect_end();
    return m;
  }
  if (kind == "dense") {
    Dense d;
    d.out_features = p.positive("output feature count");
    if (!p.done()) {
      auto tok = p.next("activation");
      auto a = parse_activation(tok);
      if (!a) p.fail(tok, "expected activation (relu or linear)");
      d.activation = *a;
    }
    p.expect_end();
    return d;
  }
  if (kind == "flatten") {
    p.expect_end();
    return Flatten{};
  }
  p.fail(kind, "unknown layer kind");
}

}  // namespace

std::size_t TensorSpec::size() const {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

ArchParseError::ArchParseError(std::size_t line, std::string token, const std::string& what)
    : ArchitectureError("line " + std::to_string(line) + ", token '" + token + "': " + what),
      line_(line),
      token_(std::move(token)) {}

std::pair<int, int> resolve_padding(const Conv2D& conv) {
  switch (conv.padding.kind) {
    case Padding::Kind::kSame:
      return {(conv.kernel_h - 1) / 2, (conv.kernel_w - 1) / 2};
    case Padding::Kind::kExplicit:
      return {conv.padding.amount, conv.padding.amount};
    case Padding::Kind::kValid:
      break;
  }
  return {0, 0};
}

Architecture::Architecture(Shape3 input_shape, std::vector<LayerSpec> layers)
    : input_shape_(input_shape), layers_(std::move(layers)) {
  if (input_shape_.channels <= 0 || input_shape_.height <= 0 || input_shape_.width <= 0) {
    throw ArchitectureError("input shape must be positive in every dimension");
  }
  if (layers_.empty()) throw ArchitectureError("architecture has no layers");
  const auto* last = std::get_if<Dense>(&layers_.back());
  if (last == nullptr || last->activation != Activation::kLinear) {
    throw ArchitectureError("final layer must be 'dense <classes> linear'");
  }

  shapes_.push_back(input_shape_);
  std::size_t offset = 0;
  auto add_tensor = [&](std::size_t layer, const char* kind, bool bias,
                        std::vector<std::uint32_t> dims) {
    TensorSpec t;
    t.name = std::string(kind) + std::to_string(layer) + (bias ? ".bias" : ".weight");
    t.dims = std::move(dims);
    t.layer = layer;
    t.is_bias = bias;
    t.offset = offset;
    offset += t.size();
    layout_.push_back(std::move(t));
  };

  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const Shape3 in = shapes_.back();
    const std::string where = "layer " + std::to_string(i) + ": ";
    Shape3 out = std::visit(
        Overloaded{
            [&](const Conv2D& c) {
              if (c.out_channels <= 0 || c.kernel_h <= 0 || c.kernel_w <= 0 || c.stride <= 0) {
                throw ArchitectureError(where + "conv sizes must be positive");
              }
              if (c.padding.kind == Padding::Kind::kSame &&
                  (c.stride != 1 || c.kernel_h % 2 == 0 || c.kernel_w % 2 == 0)) {
                throw ArchitectureError(where + "'pad same' needs stride 1 and an odd kernel");
              }
              const auto [ph, pw] = resolve_padding(c);
              const int eh = in.height + 2 * ph - c.kernel_h;
              const int ew = in.width + 2 * pw - c.kernel_w;
              if (eh < 0 || ew < 0) throw ArchitectureError(where + "kernel larger than input");
              add_tensor(i, "conv", false,
                         {static_cast<std::uint32_t>(c.out_channels),
                          static_cast<std::uint32_t>(in.channels),
                          static_cast<std::uint32_t>(c.kernel_h),
                          static_cast<std::uint32_t>(c.kernel_w)});
              add_tensor(i, "conv", true, {static_cast<std::uint32_t>(c.out_channels)});
              return Shape3{c.out_channels, eh / c.stride + 1, ew / c.stride + 1};
            },
            [&](const MaxPool2D& m) {
              if (m.pool_h <= 0 || m.pool_w <= 0 || m.stride <= 0) {
                throw ArchitectureError(where + "maxpool sizes must be positive");
              }
              if (in.height < m.pool_h || in.width < m.pool_w) {
                throw ArchitectureError(where + "pool window larger than input");
              }
              return Shape3{in.channels, (in.height - m.pool_h) / m.stride + 1,
                            (in.width - m.pool_w) / m.stride + 1};
            },
            [&](const Dense& d) {
              if (d.out_features <= 0) throw ArchitectureError(where + "dense width must be positive");
              add_tensor(i, "dense", false,
                         {static_cast<std::uint32_t>(d.out_features),
                          static_cast<std::uint32_t>(in.size())});
              add_tensor(i, "dense", true, {static_cast<std::uint32_t>(d.out_features)});
              return Shape3{d.out_features, 1, 1};
            },
            [&](const Flatten&) { return Shape3{static_cast<int>(in.size()), 1, 1}; },
        },
        layers_[i]);
    shapes_.push_back(out);
  }
  parameter_count_ = offset;
}

Architecture Architecture::parse(std::string_view text) {
  std::optional<Shape3> input;
  std::vector<LayerSpec> layers;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto nl = text.find('\n', start);
    auto line = text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
    start = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    auto tokens = split_tokens(line);
    if (tokens.empty()) continue;

    LineParser p(line_no, tokens);
    auto kind = p.next("layer kind");
    if (kind == "input") {
      if (input) p.fail(kind, "duplicate input line");
      auto d = p.dims("input shape CxHxW", 3);
      p.expect_end();
      input = Shape3{d[0], d[1], d[2]};
      continue;
    }
    if (!input) p.fail(kind, "first line must be 'input CxHxW'");
    layers.push_back(parse_layer(p, kind));
  }
  if (!input) throw ArchParseError(line_no, "<end of input>", "missing 'input CxHxW' line");
  try {
    return Architecture(*input, std::move(layers));
  } catch (const ArchParseError&) {
    throw;
  } catch (const ArchitectureError& e) {
    throw ArchParseError(line_no, "<end of input>", e.what());
  }
}

std::string Architecture::to_text() const {
  std::ostringstream os;
  os << "input " << input_shape_.channels << 'x' << input_shape_.height << 'x'
     << input_shape_.width << '\n';
  for (const auto& layer : layers_) {
    std::visit(Overloaded{
                   [&](const Conv2D& c) {
                     os << "conv " << c.out_channels << ' ' << c.kernel_h << 'x' << c.kernel_w
                        << " stride " << c.stride << " pad ";
                     switch (c.padding.kind) {
                       case Padding::Kind::kSame: os << "same"; break;
                       case Padding::Kind::kValid: os << "valid"; break;
                       case Padding::Kind::kExplicit: os << c.padding.amount; break;
                     }
                     os << ' ' << activation_name(c.activation) << '\n';
                   },
                   [&](const MaxPool2D& m) {
                     os << "maxpool " << m.pool_h << 'x' << m.pool_w << " stride " << m.stride
                        << '\n';
                   },
                   [&](const Dense& d) {
                     os << "dense " << d.out_features << ' ' << activation_name(d.activation)
                        << '\n';
                   },
                   [&](const Flatten&) { os << "flatten\n"; },
               },
               layer);
  }
  return os.str();
}

Architecture mnist_architecture() {
  return Architecture::parse(
      "input 1x28x28\n"
      "conv 16 5x5 stride 1 pad valid relu\n"
      "maxpool 2x2 stride 2\n"
      "conv 32 3x3 stride 1 pad valid relu\n"
      "maxpool 2x2 stride 2\n"
      "flatten\n"
      "dense 100 relu\n"
      "dense 10 linear\n");
}

Architecture fashion_mnist_architecture() {
  return Architecture::parse(
      "input 1x28x28\n"
      "conv 32 5x5 stride 1 pad valid relu\n"
      "maxpool 2x2 stride 2\n"
      "conv 64 3x3 stride 1 pad valid relu\n"
      "maxpool 2x2 stride 2\n"
      "flatten\n"
      "dense 100 relu\n"
      "dense 10 linear\n");
}

Architecture cifar10_architecture() {
  return Architecture::parse(
      "input 3x32x32\n"
      "conv 32 3x3 stride 1 pad same relu\n"
      "conv 32 3x3 stride 1 pad valid relu\n"
      "maxpool 2x2 stride 2\n"
      "conv 64 3x3 stride 1 pad same relu\n"
      "conv 64 3x3 stride 1 pad valid relu\n"
      "maxpool 2x2 stride 2\n"
      "flatten\n"
      "dense 512 relu\n"
      "dense 10 linear\n");
}

}  // namespace paramlock
