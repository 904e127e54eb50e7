#include "amrg/image_io.hpp"

#include <stdexcept>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

namespace amrg {

auto read_image(const std::filesystem::path &path) -> GrayImage {
  cv::Mat mat = cv::imread(path.string(), cv::IMREAD_GRAYSCALE | cv::IMREAD_ANYDEPTH);
  if (mat.empty()) throw std::runtime_error("cannot read image " + path.string());

  BitDepth depth;
  if (mat.depth() == CV_8U) {
    depth = BitDepth::Eight;
  } else if (mat.depth() == CV_16U) {
    depth = BitDepth::Sixteen;
  } else {
    throw std::runtime_error("unsupported sample type in " + path.string());
  }

  std::vector<std::uint16_t> data;
  data.reserve(static_cast<std::size_t>(mat.rows) * mat.cols);
  for (int y = 0; y < mat.rows; ++y)
    for (int x = 0; x < mat.cols; ++x)
      data.push_back(depth == BitDepth::Eight ? mat.at<std::uint8_t>(y, x) : mat.at<std::uint16_t>(y, x));
  return GrayImage(mat.cols, mat.rows, depth, std::move(data));
}

void write_png(const std::filesystem::path &path, const GrayImage &img) {
  const GrayImage img8 = to_8bit(img);
  cv::Mat mat(img8.height(), img8.width(), CV_8UC1);
  for (int y = 0; y < img8.height(); ++y)
    for (int x = 0; x < img8.width(); ++x) mat.at<std::uint8_t>(y, x) = static_cast<std::uint8_t>(img8.at(x, y));
  if (!cv::imwrite(path.string(), mat)) throw std::runtime_error("cannot write " + path.string());
}

} // namespace amrg
