#include "wmtrace/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <string>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "wmtrace/error.hpp"

namespace wmtrace::io {
namespace {

Raster from_mat(const cv::Mat& mat) {
  if (mat.empty()) throw Error(ErrorCode::IoError, "image could not be decoded");
  if (mat.depth() != CV_8U) throw Error(ErrorCode::FormatError, "only 8-bit images are supported");
  Raster img(mat.cols, mat.rows);
  const int nc = mat.channels();
  for (int y = 0; y < mat.rows; ++y) {
    const std::uint8_t* row = mat.ptr<std::uint8_t>(y);
    for (int x = 0; x < mat.cols; ++x) {
      const std::uint8_t* px = row + static_cast<std::size_t>(x) * nc;
      if (nc == 1) {
        img.at(x, y, 0) = img.at(x, y, 1) = img.at(x, y, 2) = px[0];
      } else {
        // OpenCV stores BGR(A)
        img.at(x, y, 0) = px[2];
        img.at(x, y, 1) = px[1];
        img.at(x, y, 2) = px[0];
      }
    }
  }
  return img;
}

cv::Mat to_mat(const Raster& img) {
  cv::Mat mat(img.height, img.width, CV_8UC3);
  for (int y = 0; y < img.height; ++y) {
    std::uint8_t* row = mat.ptr<std::uint8_t>(y);
    for (int x = 0; x < img.width; ++x) {
      row[x * 3 + 0] = img.at(x, y, 2);
      row[x * 3 + 1] = img.at(x, y, 1);
      row[x * 3 + 2] = img.at(x, y, 0);
    }
  }
  return mat;
}

std::string lower_ext(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

}  // namespace

Raster load_image(const std::filesystem::path& path) {
  cv::Mat mat = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (mat.empty()) throw Error(ErrorCode::IoError, "cannot read image " + path.string());
  return from_mat(mat);
}

void save_image(const Raster& img, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::vector<int> flags;
  const std::string ext = lower_ext(path);
  if (ext == ".png") flags = {cv::IMWRITE_PNG_COMPRESSION, 3};
  if (!cv::imwrite(path.string(), to_mat(img), flags)) {
    throw Error(ErrorCode::IoError, "cannot write image " + path.string());
  }
}

std::vector<std::uint8_t> encode_jpeg(const Raster& img, int quality) {
  std::vector<std::uint8_t> buf;
  // libjpeg defaults give baseline, 2x2 luma sampling (4:2:0).
  const std::vector<int> flags = {cv::IMWRITE_JPEG_QUALITY, quality, cv::IMWRITE_JPEG_OPTIMIZE, 0,
                                  cv::IMWRITE_JPEG_PROGRESSIVE, 0};
  if (!cv::imencode(".jpg", to_mat(img), buf, flags)) {
    throw Error(ErrorCode::IoError, "JPEG encoding failed");
  }
  return buf;
}

Raster decode_image(std::span<const std::uint8_t> bytes) {
  const cv::Mat buf(1, static_cast<int>(bytes.size()), CV_8UC1, const_cast<std::uint8_t*>(bytes.data()));
  return from_mat(cv::imdecode(buf, cv::IMREAD_COLOR));
}

bool is_image_file(const std::filesystem::path& path) {
  const std::string ext = lower_ext(path);
  return ext == ".png" || ext == ".bmp" || ext == ".jpg" || ext == ".jpeg";
}

}  // namespace wmtrace::io
