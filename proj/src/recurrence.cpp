#include "twoscale/recurrence.hpp"

#include "twoscale/error.hpp"
#include "twoscale/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace twoscale::recurrence {

SquareMatrix recurrence_matrix(const embedding::StateMatrix& states) {
  const std::size_t k = states.rows;
  SquareMatrix out(k, 0.0);
  parallel_for(k, [&](std::size_t i) {
    const auto a = states.row(i);
    for (std::size_t j = i + 1; j < k; ++j) {
      const auto b = states.row(j);
      double sum = 0.0;
      for (std::size_t c = 0; c < a.size(); ++c) {
        const double diff = a[c] - b[c];
        sum += diff * diff;
      }
      out(i, j) = std::sqrt(sum);
    }
  });
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) out(j, i) = out(i, j);
  }
  return out;
}

BinaryRecurrence threshold(const SquareMatrix& distances, const ThresholdRule& rule) {
  const std::size_t k = distances.size;
  double epsilon = rule.value;
  if (rule.kind == ThresholdRule::Kind::target_rate) {
    if (!(rule.value > 0.0 && rule.value < 1.0)) {
      throw Error(ErrorCode::InvalidRate, "target recurrence rate must lie in (0, 1)");
    }
    std::vector<double> upper;
    upper.reserve(k * (k - 1) / 2);
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = i + 1; j < k; ++j) upper.push_back(distances(i, j));
    }
    if (upper.empty()) {
      epsilon = 0.0;
    } else {
      const auto wanted = static_cast<std::size_t>(std::ceil(rule.value * static_cast<double>(upper.size())));
      const std::size_t index = std::clamp<std::size_t>(wanted, 1, upper.size()) - 1;
      std::nth_element(upper.begin(), upper.begin() + static_cast<std::ptrdiff_t>(index), upper.end());
      epsilon = upper[index];
    }
  } else if (!(epsilon >= 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "fixed threshold must be non-negative");
  }

  BinaryRecurrence out;
  out.size = k;
  out.epsilon = epsilon;
  out.bits.resize(k * k);
  for (std::size_t i = 0; i < k * k; ++i) out.bits[i] = distances.data[i] <= epsilon ? 1 : 0;
  return out;
}

double recurrence_rate(const BinaryRecurrence& br) {
  const std::size_t k = br.size;
  if (k < 2) return 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      if (i != j && br(i, j)) ++count;
    }
  }
  return static_cast<double>(count) / static_cast<double>(k * (k - 1));
}

std::map<std::size_t, std::size_t> diagonal_lines(const BinaryRecurrence& br) {
  std::map<std::size_t, std::size_t> hist;
  const std::size_t k = br.size;
  for (std::size_t offset = 1; offset < k; ++offset) {
    std::size_t run = 0;
    for (std::size_t i = 0; i + offset < k; ++i) {
      if (br(i, i + offset)) {
        ++run;
      } else if (run > 0) {
        ++hist[run];
        run = 0;
      }
    }
    if (run > 0) ++hist[run];
  }
  return hist;
}

std::map<std::size_t, std::size_t> vertical_lines(const BinaryRecurrence& br) {
  std::map<std::size_t, std::size_t> hist;
  const std::size_t k = br.size;
  for (std::size_t j = 0; j < k; ++j) {
    std::size_t run = 0;
    for (std::size_t i = 0; i < k; ++i) {
      if (i != j && br(i, j)) {
        ++run;
      } else if (run > 0) {
        ++hist[run];
        run = 0;
      }
    }
    if (run > 0) ++hist[run];
  }
  return hist;
}

namespace {

struct LineStats {
  double fraction = 0.0;  // points on lines >= min_len over all points on lines
  double mean = 0.0;      // mean length of lines >= min_len
  double entropy = 0.0;
  std::size_t longest = 0;
};

LineStats line_stats(const std::map<std::size_t, std::size_t>& hist, std::size_t min_len) {
  LineStats s;
  double all_points = 0.0;
  double long_points = 0.0;
  double long_lines = 0.0;
  for (const auto& [len, count] : hist) {
    const double weighted = static_cast<double>(len) * static_cast<double>(count);
    all_points += weighted;
    if (len >= min_len) {
      long_points += weighted;
      long_lines += static_cast<double>(count);
    }
    s.longest = std::max(s.longest, len);
  }
  if (all_points > 0.0) s.fraction = long_points / all_points;
  if (long_lines > 0.0) {
    s.mean = long_points / long_lines;
    for (const auto& [len, count] : hist) {
      if (len < min_len) continue;
      const double p = static_cast<double>(count) / long_lines;
      s.entropy -= p * std::log(p);
    }
  }
  return s;
}

}  // namespace

RqaFeatures rqa_measures(const BinaryRecurrence& br, std::size_t l_min, std::size_t v_min) {
  if (br.size < 2) throw Error(ErrorCode::InvalidArgument, "RQA needs at least 2 states");
  if (l_min < 1 || v_min < 1) throw Error(ErrorCode::InvalidArgument, "l_min and v_min must be >= 1");
  RqaFeatures f;
  f.rr = recurrence_rate(br);
  if (f.rr == 0.0) {
    f.no_recurrences = true;
    return f;
  }
  const auto diag = line_stats(diagonal_lines(br), l_min);
  const auto vert = line_stats(vertical_lines(br), v_min);
  f.det = diag.fraction;
  f.l_mean = diag.mean;
  f.l_max = static_cast<double>(diag.longest);
  f.entr = std::max(0.0, diag.entropy);
  f.lam = vert.fraction;
  f.tt = vert.mean;
  return f;
}

SquareMatrix resize_bilinear(const SquareMatrix& matrix, std::size_t size) {
  const std::size_t k = matrix.size;
  if (k < 2) throw Error(ErrorCode::InvalidArgument, "resize needs at least a 2x2 matrix");
  if (size < 2) throw Error(ErrorCode::InvalidArgument, "resize target must be at least 2");

  // Sample position, lower index and fraction for every output coordinate.
  std::vector<std::size_t> lo(size);
  std::vector<double> frac(size);
  const double scale = static_cast<double>(k - 1) / static_cast<double>(size - 1);
  for (std::size_t i = 0; i < size; ++i) {
    const double pos = (i + 1 == size) ? static_cast<double>(k - 1) : static_cast<double>(i) * scale;
    std::size_t base = static_cast<std::size_t>(std::floor(pos));
    if (base >= k - 1) base = k - 2;
    lo[i] = base;
    frac[i] = pos - static_cast<double>(base);
  }

  SquareMatrix out(size, 0.0);
  const auto sample = [&](std::size_t r, std::size_t c) {
    const double fy = frac[r];
    const double fx = frac[c];
    const std::size_t y0 = lo[r];
    const std::size_t x0 = lo[c];
    // a + f (b - a) returns a exactly when a == b, so flat regions stay flat.
    const double top = matrix(y0, x0) + fx * (matrix(y0, x0 + 1) - matrix(y0, x0));
    const double bottom = matrix(y0 + 1, x0) + fx * (matrix(y0 + 1, x0 + 1) - matrix(y0 + 1, x0));
    return top + fy * (bottom - top);
  };

  bool symmetric = true;
  for (std::size_t i = 0; i < k && symmetric; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      if (matrix(i, j) != matrix(j, i)) {
        symmetric = false;
        break;
      }
    }
  }

  parallel_for(size, [&](std::size_t r) {
    for (std::size_t c = symmetric ? r : 0; c < size; ++c) out(r, c) = sample(r, c);
  });
  if (symmetric) {
    for (std::size_t r = 0; r < size; ++r) {
      for (std::size_t c = r + 1; c < size; ++c) out(c, r) = out(r, c);
    }
  }
  return out;
}

std::vector<unsigned char> to_grayscale(const SquareMatrix& matrix) {
  std::vector<unsigned char> pixels(matrix.data.size(), 0);
  if (matrix.data.empty()) return pixels;
  const auto [lo_it, hi_it] = std::minmax_element(matrix.data.begin(), matrix.data.end());
  const double lo = *lo_it;
  const double range = *hi_it - lo;
  if (!(range > 0.0)) return pixels;
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    const double scaled = std::round(255.0 * (matrix.data[i] - lo) / range);
    pixels[i] = static_cast<unsigned char>(std::clamp(scaled, 0.0, 255.0));
  }
  return pixels;
}

void render_grayscale(const SquareMatrix& matrix, const std::filesystem::path& path) {
  if (matrix.size == 0) throw Error(ErrorCode::InvalidArgument, "cannot render an empty matrix");
  const auto pixels = to_grayscale(matrix);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
  out << "P5\n" << matrix.size << ' ' << matrix.size << "\n255\n";
  out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
  if (!out) throw Error(ErrorCode::IoError, "failed writing '" + path.string() + "'");
}

PgmImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path.string() + "'");
  std::string magic;
  PgmImage img;
  in >> magic >> img.width >> img.height >> img.max_value;
  if (magic != "P5" || !in || img.max_value == 0 || img.max_value > 255) {
    throw Error(ErrorCode::ParseError, path.string() + ": not an 8-bit binary PGM");
  }
  in.get();  // single whitespace after the header
  img.pixels.resize(img.width * img.height);
  in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.pixels.size())) {
    throw Error(ErrorCode::ParseError, path.string() + ": truncated pixel data");
  }
  return img;
}

}  // namespace twoscale::recurrence
