#pragma once

#include "morpholander/common.hpp"

#include <Eigen/Core>

#include <random>
#include <span>
#include <string>

namespace morpho {

// Regular heightfield with bilinear interpolation. Row index runs along +y,
// column index along +x; sample (r, c) sits at origin + (c, r) * cell_size.
class Terrain {
public:
    Terrain(double origin_x, double origin_y, double cell_size, Eigen::MatrixXd heights);

    static Terrain flat(double half_extent, double cell_size, double height = 0.0);

    // Plain-text grid: rows of space-separated heights in meters. Optional
    // header lines "# cell_size <m>" and "# origin <x> <y>"; without an
    // origin the grid is centred on (0, 0). Default cell size is 0.01 m.
    static Terrain load(const std::string& path);
    static Terrain parse(const std::string& text);
    void save(const std::string& path) const;

    double height(double x, double y) const;
    bool contains(double x, double y) const;

    double min_x() const { return origin_x_; }
    double min_y() const { return origin_y_; }
    double max_x() const { return origin_x_ + cell_ * static_cast<double>(heights_.cols() - 1); }
    double max_y() const { return origin_y_ + cell_ * static_cast<double>(heights_.rows() - 1); }
    double cell_size() const { return cell_; }
    const Eigen::MatrixXd& heights() const { return heights_; }

    // Raises every sample within `half_size` (Chebyshev) of (cx, cy) to `top`.
    void add_block(double cx, double cy, double half_size, double top);

private:
    double origin_x_;
    double origin_y_;
    double cell_;
    Eigen::MatrixXd heights_;
};

struct FootBlockSpec {
    double half_extent = 2.0;      // m, terrain spans [-e, e]^2 around the platform
    double cell_size = 0.01;       // m
    double block_half_size = 0.06; // m
    double max_step = 0.08;        // m, block heights ~ U[0, max_step]
};

// Flat ground with one block under each listed foot position, heights drawn
// from `rng`. The drawn heights are written to `heights_out` in foot order.
Terrain make_foot_block_terrain(std::span<const Vec3> feet_world, const FootBlockSpec& spec,
                                std::mt19937_64& rng, std::span<double> heights_out = {});

}  // namespace morpho
