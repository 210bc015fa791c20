#include "dehaze/image_io.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <algorithm>
#include <cmath>

namespace dehaze {

namespace {

int quantize(double v, int levels) {
    const double c = std::clamp(v, 0.0, 1.0);
    return static_cast<int>(std::lround(c * levels));
}

}  // namespace

Tensor read_image_rgb8(const std::filesystem::path& path) {
    cv::Mat mat = cv::imread(path.string(), cv::IMREAD_COLOR);
    if (mat.empty()) throw IoError("cannot read image: " + path.string());
    Tensor out({mat.rows, mat.cols, 3});
    for (int i = 0; i < mat.rows; ++i) {
        const cv::Vec3b* row = mat.ptr<cv::Vec3b>(i);
        for (int j = 0; j < mat.cols; ++j) {
            // OpenCV stores BGR.
            out(i, j, 0) = row[j][2] / 255.0;
            out(i, j, 1) = row[j][1] / 255.0;
            out(i, j, 2) = row[j][0] / 255.0;
        }
    }
    return out;
}

void write_image_rgb8(const std::filesystem::path& path, const Tensor& image01) {
    if (image01.ndim() != 3 || image01.dim(2) != 3)
        throw DimensionError("write_image_rgb8: expected H×W×3");
    cv::Mat mat(image01.dim(0), image01.dim(1), CV_8UC3);
    for (int i = 0; i < mat.rows; ++i) {
        cv::Vec3b* row = mat.ptr<cv::Vec3b>(i);
        for (int j = 0; j < mat.cols; ++j) {
            row[j][2] = static_cast<unsigned char>(quantize(image01(i, j, 0), 255));
            row[j][1] = static_cast<unsigned char>(quantize(image01(i, j, 1), 255));
            row[j][0] = static_cast<unsigned char>(quantize(image01(i, j, 2), 255));
        }
    }
    if (!cv::imwrite(path.string(), mat)) throw IoError("cannot write image: " + path.string());
}

Tensor read_depth_u16(const std::filesystem::path& path) {
    cv::Mat mat = cv::imread(path.string(), cv::IMREAD_ANYDEPTH | cv::IMREAD_GRAYSCALE);
    if (mat.empty()) throw IoError("cannot read depth map: " + path.string());
    if (mat.type() != CV_16UC1) throw IoError("depth map is not 16-bit single-channel: " + path.string());
    Tensor out({mat.rows, mat.cols, 1});
    for (int i = 0; i < mat.rows; ++i) {
        const std::uint16_t* row = mat.ptr<std::uint16_t>(i);
        for (int j = 0; j < mat.cols; ++j) out(i, j, 0) = row[j] / 65535.0;
    }
    return out;
}

void write_depth_u16(const std::filesystem::path& path, const Tensor& depth01) {
    if (depth01.ndim() != 3 || depth01.dim(2) != 1)
        throw DimensionError("write_depth_u16: expected H×W×1");
    cv::Mat mat(depth01.dim(0), depth01.dim(1), CV_16UC1);
    for (int i = 0; i < mat.rows; ++i) {
        std::uint16_t* row = mat.ptr<std::uint16_t>(i);
        for (int j = 0; j < mat.cols; ++j)
            row[j] = static_cast<std::uint16_t>(quantize(depth01(i, j, 0), 65535));
    }
    if (!cv::imwrite(path.string(), mat)) throw IoError("cannot write depth map: " + path.string());
}

}  // namespace dehaze
