#pragma once

#include "sat/image.hpp"

#include <array>

namespace sat::geometry {

// Axis-aligned box in continuous frame coordinates. Pixel (row i, col j) has
// its center at (x=j, y=i); a box spanning pixel columns c0..c1 inclusive has
// w = c1-c0+1 and occupies [cx-w/2, cx+w/2] in continuous space.
struct Box {
    double cx = 0.0;
    double cy = 0.0;
    double w = 0.0;
    double h = 0.0;

    bool valid() const { return w > 0.0 && h > 0.0; }

    // corner form (x0, y0, x1, y1)
    std::array<double, 4> corners() const { return {cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2}; }
    static Box from_corners(double x0, double y0, double x1, double y1) {
        return {(x0 + x1) / 2, (y0 + y1) / 2, x1 - x0, y1 - y0};
    }
    // minimal box containing pixels rows r0..r1, cols c0..c1 (inclusive)
    static Box from_pixel_extents(int r0, int c0, int r1, int c1) {
        return {(c0 + c1) / 2.0, (r0 + r1) / 2.0, static_cast<double>(c1 - c0 + 1), static_cast<double>(r1 - r0 + 1)};
    }
};

double box_iou(const Box& a, const Box& b);

// Mapping between a square source region of the full frame and a square
// output_size x output_size crop. Crop pixel u has its center at frame
// coordinate (cx - side/2) + (u + 0.5) * side / output_size.
struct CropTransform {
    double cx = 0.0;
    double cy = 0.0;
    double side = 0.0; // source region side, frame pixels
    int output_size = 0;

    double scale() const { return output_size / side; }

    // crop coords -> frame coords
    double to_frame_x(double u) const { return (cx - side / 2) + (u + 0.5) * side / output_size; }
    double to_frame_y(double v) const { return (cy - side / 2) + (v + 0.5) * side / output_size; }
    // frame coords -> crop coords
    double to_crop_x(double x) const { return (x - (cx - side / 2)) * output_size / side - 0.5; }
    double to_crop_y(double y) const { return (y - (cy - side / 2)) * output_size / side - 0.5; }

    Box box_to_frame(const Box& crop_box) const;
    Box box_to_crop(const Box& frame_box) const;
};

// Square search region around a target box: side = context_factor *
// sqrt((w + p)(h + p)) with p = (w + h) / 2.
CropTransform make_search_region(const Box& box, double context_factor, int output_size);

// Bilinear crop; samples falling outside the frame take the given fill value.
Image crop_and_resize(const Image& frame, const CropTransform& t, const std::array<double, 3>& fill);

// Inverse resampling of a crop-space map onto the full frame. Frame pixels
// whose center lies outside the source region are 0.
std::vector<double> paste_back(const std::vector<double>& crop_map, int crop_size, const CropTransform& t,
                               int frame_h, int frame_w);

} // namespace sat::geometry
