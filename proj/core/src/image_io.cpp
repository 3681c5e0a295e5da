#include "depthsim/image_io.hpp"

#include <bit>
#include <cctype>
#include <cstring>
#include <fstream>
#include <string>

#include "depthsim/error.hpp"

namespace depthsim {
namespace {

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingAssetError(path.string());
  return in;
}

std::uint32_t byteswap32(std::uint32_t v) { return __builtin_bswap32(v); }

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeError("cannot write " + path.string());
  return out;
}

// Next whitespace-delimited header token, skipping '#' comments.
std::string header_token(std::istream& in, const std::filesystem::path& path) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {}
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  if (tok.empty()) throw ParseError(path.string(), 0, "truncated header");
  return tok;
}

int header_int(std::istream& in, const std::filesystem::path& path, const char* what) {
  const std::string tok = header_token(in, path);
  try {
    std::size_t pos = 0;
    const int v = std::stoi(tok, &pos);
    if (pos != tok.size() || v <= 0) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw ParseError(path.string(), 0, std::string("bad ") + what + " '" + tok + "'");
  }
}

}  // namespace

ImageF read_pfm(const std::filesystem::path& path) {
  auto in = open_in(path);
  const std::string magic = header_token(in, path);
  int channels;
  if (magic == "PF") channels = 3;
  else if (magic == "Pf") channels = 1;
  else throw ParseError(path.string(), 1, "not a PFM file (magic '" + magic + "')");
  const int w = header_int(in, path, "width");
  const int h = header_int(in, path, "height");
  const std::string scale_tok = header_token(in, path);
  double scale;
  try {
    scale = std::stod(scale_tok);
  } catch (const std::exception&) {
    throw ParseError(path.string(), 3, "bad scale '" + scale_tok + "'");
  }
  if (scale == 0.0) throw ParseError(path.string(), 3, "zero scale");
  const bool file_little = scale < 0;
  const bool swap = file_little != (std::endian::native == std::endian::little);

  ImageF img(w, h, channels);
  const std::size_t row_floats = static_cast<std::size_t>(w) * channels;
  std::vector<std::uint32_t> buf(row_floats);
  for (int r = 0; r < h; ++r) {
    if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(row_floats * 4)))
      throw ParseError(path.string(), 0, "truncated pixel data");
    const int y = h - 1 - r;
    float* dst = img.data.data() + img.index(0, y);
    for (std::size_t i = 0; i < row_floats; ++i) {
      const std::uint32_t bits = swap ? byteswap32(buf[i]) : buf[i];
      dst[i] = std::bit_cast<float>(bits);
    }
  }
  return img;
}

void write_pfm(const std::filesystem::path& path, const ImageF& img) {
  if (img.channels != 1 && img.channels != 3)
    throw RuntimeError("write_pfm: PFM supports 1 or 3 channels");
  auto out = open_out(path);
  out << (img.channels == 3 ? "PF" : "Pf") << '\n'
      << img.width << ' ' << img.height << '\n'
      << "-1.0" << '\n';
  const std::size_t row_floats = static_cast<std::size_t>(img.width) * img.channels;
  std::vector<std::uint32_t> buf(row_floats);
  for (int y = img.height - 1; y >= 0; --y) {
    const float* src = img.data.data() + img.index(0, y);
    for (std::size_t i = 0; i < row_floats; ++i) {
      const auto bits = std::bit_cast<std::uint32_t>(src[i]);
      buf[i] = std::endian::native == std::endian::little ? bits : byteswap32(bits);
    }
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(row_floats * 4));
  }
  if (!out) throw RuntimeError("write failed: " + path.string());
}

Image8 read_pnm(const std::filesystem::path& path) {
  auto in = open_in(path);
  const std::string magic = header_token(in, path);
  int channels;
  if (magic == "P5") channels = 1;
  else if (magic == "P6") channels = 3;
  else throw ParseError(path.string(), 1, "unsupported netpbm magic '" + magic + "' (need P5/P6)");
  const int w = header_int(in, path, "width");
  const int h = header_int(in, path, "height");
  const int maxval = header_int(in, path, "maxval");
  if (maxval > 255) throw ParseError(path.string(), 0, "16-bit netpbm not supported");
  // header_token consumed exactly one whitespace byte after maxval.
  Image8 img(w, h, channels);
  if (!in.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(img.data.size())))
    throw ParseError(path.string(), 0, "truncated pixel data");
  if (maxval != 255) {
    for (auto& v : img.data) v = static_cast<std::uint8_t>((v * 255 + maxval / 2) / maxval);
  }
  return img;
}

void write_pgm(const std::filesystem::path& path, const Image8& img) {
  if (img.channels != 1) throw RuntimeError("write_pgm: need 1 channel");
  write_pnm(path, img);
}

void write_ppm(const std::filesystem::path& path, const Image8& img) {
  if (img.channels != 3) throw RuntimeError("write_ppm: need 3 channels");
  write_pnm(path, img);
}

void write_pnm(const std::filesystem::path& path, const Image8& img) {
  if (img.channels != 1 && img.channels != 3) throw RuntimeError("write_pnm: need 1 or 3 channels");
  auto out = open_out(path);
  out << (img.channels == 1 ? "P5" : "P6") << '\n' << img.width << ' ' << img.height << '\n' << 255 << '\n';
  out.write(reinterpret_cast<const char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
  if (!out) throw RuntimeError("write failed: " + path.string());
}

ImageF read_image_normalized(const std::filesystem::path& path) {
  auto in = open_in(path);
  char magic[2] = {0, 0};
  in.read(magic, 2);
  in.close();
  if (magic[0] == 'P' && (magic[1] == 'f' || magic[1] == 'F')) return read_pfm(path);
  const Image8 raw = read_pnm(path);
  ImageF out(raw.width, raw.height, raw.channels);
  for (std::size_t i = 0; i < raw.data.size(); ++i) out.data[i] = raw.data[i] / 255.0f;
  return out;
}

}  // namespace depthsim
