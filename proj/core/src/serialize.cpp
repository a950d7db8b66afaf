#include "fidel/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "fidel/data.hpp"

namespace fidel {

namespace {

constexpr std::uint8_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "serializer assumes a little-endian host");

void put_u8(std::ostream& out, std::uint8_t v) { out.put(static_cast<char>(v)); }
void put_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), 4);
}
void put_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), 8);
}
void put_f64(std::ostream& out, double v) { out.write(reinterpret_cast<const char*>(&v), 8); }

std::uint8_t get_u8(std::istream& in) { return static_cast<std::uint8_t>(in.get()); }
std::uint32_t get_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 4);
  return v;
}
std::uint64_t get_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 8);
  return v;
}

void put_shape(std::ostream& out, const Shape& s) {
  put_u8(out, static_cast<std::uint8_t>(s.size()));
  for (std::size_t d : s) put_u64(out, d);
}

Shape get_shape(std::istream& in) {
  Shape s(get_u8(in));
  for (std::size_t& d : s) d = get_u64(in);
  return s;
}

void put_blob(std::ostream& out, const Tensor& t) {
  put_u64(out, t.numel());
  for (double v : t.data) put_f64(out, v);
}

void get_blob(std::istream& in, Tensor& t) {
  const std::uint64_t n = get_u64(in);
  if (n != t.numel()) throw io_error("container: parameter blob size mismatch");
  in.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(8 * n));
}

void put_layer(std::ostream& out, const LayerSpec& l) {
  put_u8(out, static_cast<std::uint8_t>(l.kind));
  put_u8(out, static_cast<std::uint8_t>(l.activation));
  put_u8(out, static_cast<std::uint8_t>(l.padding));
  put_u64(out, l.units);
  put_u64(out, l.kernel);
  put_u64(out, l.channels);
  put_u64(out, l.stride);
  put_u64(out, l.pool);
  put_u64(out, l.factor);
  put_u64(out, l.out_extra);
  put_f64(out, l.rate);
  put_shape(out, l.target_shape);
}

LayerSpec get_layer(std::istream& in) {
  LayerSpec l;
  l.kind = static_cast<LayerSpec::Kind>(get_u8(in));
  l.activation = static_cast<Activation>(get_u8(in));
  l.padding = static_cast<Padding>(get_u8(in));
  l.units = get_u64(in);
  l.kernel = get_u64(in);
  l.channels = get_u64(in);
  l.stride = get_u64(in);
  l.pool = get_u64(in);
  l.factor = get_u64(in);
  l.out_extra = get_u64(in);
  in.read(reinterpret_cast<char*>(&l.rate), 8);
  l.target_shape = get_shape(in);
  return l;
}

void write_header(std::ostream& out, const char* magic, const Model& reference) {
  out.write(magic, 4);
  put_u8(out, kVersion);
  put_shape(out, reference.input_shape);
  put_u64(out, reference.rng_seed);
  put_u32(out, static_cast<std::uint32_t>(reference.layers.size()));
  for (const LayerSpec& l : reference.layers) put_layer(out, l);
}

Model read_header(std::istream& in, const char* expect_magic, const std::string& path) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, expect_magic, 4) != 0)
    throw io_error(path + ": bad magic, expected " + expect_magic);
  if (get_u8(in) != kVersion) throw io_error(path + ": unsupported container version");
  Model skeleton;
  skeleton.input_shape = get_shape(in);
  skeleton.rng_seed = get_u64(in);
  const std::uint32_t nlayers = get_u32(in);
  for (std::uint32_t i = 0; i < nlayers; ++i) skeleton.layers.push_back(get_layer(in));
  if (!in) throw io_error(path + ": truncated header");
  return skeleton;
}

void put_params(std::ostream& out, const std::vector<LayerParams>& params) {
  for (const LayerParams& p : params) {
    put_blob(out, p.w);
    put_blob(out, p.b);
    put_blob(out, p.running_mean);
    put_blob(out, p.running_var);
  }
}

void get_params(std::istream& in, std::vector<LayerParams>& params, const std::string& path) {
  for (LayerParams& p : params) {
    get_blob(in, p.w);
    get_blob(in, p.b);
    get_blob(in, p.running_mean);
    get_blob(in, p.running_var);
  }
  if (!in) throw io_error(path + ": truncated parameter data");
}

}  // namespace

void save_model(const Model& model, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw io_error(path + ": cannot open for writing");
  write_header(f, "FIDM", model);
  put_params(f, model.params);
  if (!f) throw io_error(path + ": write failed");
}

Model load_model(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw io_error(path + ": cannot open");
  Model skeleton = read_header(f, "FIDM", path);
  // rebuild to get validated, correctly shaped parameter storage
  Model model = build_model(skeleton.input_shape, skeleton.layers, skeleton.rng_seed);
  get_params(f, model.params, path);
  return model;
}

void save_update(const ModelUpdate& update, const Model& reference, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw io_error(path + ": cannot open for writing");
  write_header(f, "FIDU", reference);
  put_u32(f, update.client_id);
  put_u32(f, update.round);
  put_u32(f, update.num_samples);
  put_params(f, update.delta);
  if (!f) throw io_error(path + ": write failed");
}

ModelUpdate load_update(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw io_error(path + ": cannot open");
  Model skeleton = read_header(f, "FIDU", path);
  Model shaped = build_model(skeleton.input_shape, skeleton.layers, skeleton.rng_seed);
  ModelUpdate u;
  u.client_id = get_u32(f);
  u.round = get_u32(f);
  u.num_samples = get_u32(f);
  Gradients z = zero_gradients(shaped);
  u.delta = std::move(z.layers);
  for (std::size_t i = 0; i < u.delta.size(); ++i) {
    u.delta[i].running_mean = Tensor(shaped.params[i].running_mean.shape);
    u.delta[i].running_var = Tensor(shaped.params[i].running_var.shape);
  }
  get_params(f, u.delta, path);
  return u;
}

}  // namespace fidel
