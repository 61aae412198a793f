#include "pdat/core/io.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "pdat/core/common.hpp"

namespace pdat {

Image read_image(const std::string& path) {
  cv::Mat m = cv::imread(path, cv::IMREAD_UNCHANGED);
  if (m.empty()) return {};
  if (m.channels() == 4) cv::cvtColor(m, m, cv::COLOR_BGRA2BGR);
  if (m.depth() != CV_8U) m.convertTo(m, CV_8U);
  Image img(m.rows, m.cols, m.channels() >= 3 ? 3 : 1);
  for (int y = 0; y < m.rows; ++y)
    for (int x = 0; x < m.cols; ++x) {
      if (img.channels == 1) {
        img.at(y, x, 0) = m.channels() == 1 ? m.at<uint8_t>(y, x) : m.at<cv::Vec3b>(y, x)[0];
      } else {
        cv::Vec3b px = m.at<cv::Vec3b>(y, x);
        img.at(y, x, 0) = px[2];  // BGR -> RGB
        img.at(y, x, 1) = px[1];
        img.at(y, x, 2) = px[0];
      }
    }
  return img;
}

void write_image(const std::string& path, const Image& img) {
  if (img.empty()) throw DataError("write_image: empty image for " + path);
  cv::Mat m(img.height, img.width, img.channels == 1 ? CV_8UC1 : CV_8UC3);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      if (img.channels == 1) {
        m.at<uint8_t>(y, x) = img.at(y, x, 0);
      } else {
        m.at<cv::Vec3b>(y, x) = cv::Vec3b(img.at(y, x, 2), img.at(y, x, 1), img.at(y, x, 0));
      }
    }
  if (!cv::imwrite(path, m)) throw DataError("write_image: failed to write " + path);
}

}  // namespace pdat
