#include "morpholander/terrain.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <vector>

namespace morpho {

Terrain::Terrain(double origin_x, double origin_y, double cell_size, Eigen::MatrixXd heights)
    : origin_x_(origin_x), origin_y_(origin_y), cell_(cell_size), heights_(std::move(heights)) {
    if (!(cell_ > 0.0)) throw ConfigError("terrain: cell size must be > 0");
    if (heights_.rows() < 2 || heights_.cols() < 2) {
        throw ConfigError("terrain: grid needs at least 2 x 2 samples");
    }
    if (!heights_.allFinite()) throw ConfigError("terrain: heights must be finite");
}

Terrain Terrain::flat(double half_extent, double cell_size, double height) {
    const auto n = static_cast<Eigen::Index>(std::lround(2.0 * half_extent / cell_size)) + 1;
    return Terrain(-half_extent, -half_extent, cell_size, Eigen::MatrixXd::Constant(n, n, height));
}

Terrain Terrain::parse(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    double cell = 0.01;
    bool has_origin = false;
    double ox = 0.0;
    double oy = 0.0;
    std::vector<std::vector<double>> rows;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        if (line[first] == '#') {
            std::istringstream hs(line.substr(first + 1));
            std::string key;
            hs >> key;
            if (key == "cell_size") {
                if (!(hs >> cell)) throw ConfigError("terrain line " + std::to_string(line_no) + ": bad cell_size");
            } else if (key == "origin") {
                if (!(hs >> ox >> oy)) throw ConfigError("terrain line " + std::to_string(line_no) + ": bad origin");
                has_origin = true;
            }
            continue;
        }
        std::istringstream ls(line);
        std::vector<double> row;
        std::string tok;
        while (ls >> tok) {
            try {
                std::size_t used = 0;
                row.push_back(std::stod(tok, &used));
                if (used != tok.size()) throw std::invalid_argument(tok);
            } catch (const std::exception&) {
                throw ConfigError("terrain line " + std::to_string(line_no) + ": bad height '" + tok + "'");
            }
        }
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw ConfigError("terrain line " + std::to_string(line_no) + ": ragged row");
        }
        rows.push_back(std::move(row));
    }
    if (rows.size() < 2) throw ConfigError("terrain: need at least two rows");
    Eigen::MatrixXd h(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < rows[r].size(); ++c) {
            h(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
        }
    }
    if (!has_origin) {
        ox = -0.5 * cell * static_cast<double>(h.cols() - 1);
        oy = -0.5 * cell * static_cast<double>(h.rows() - 1);
    }
    return Terrain(ox, oy, cell, std::move(h));
}

Terrain Terrain::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("terrain: cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

void Terrain::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw ConfigError("terrain: cannot write " + path);
    out.precision(17);
    out << "# cell_size " << cell_ << "\n# origin " << origin_x_ << ' ' << origin_y_ << '\n';
    for (Eigen::Index r = 0; r < heights_.rows(); ++r) {
        for (Eigen::Index c = 0; c < heights_.cols(); ++c) {
            if (c) out << ' ';
            out << heights_(r, c);
        }
        out << '\n';
    }
}

bool Terrain::contains(double x, double y) const {
    return x >= min_x() && x <= max_x() && y >= min_y() && y <= max_y();
}

double Terrain::height(double x, double y) const {
    if (!contains(x, y)) {
        std::ostringstream os;
        os << "terrain query (" << x << ", " << y << ") outside bounds";
        throw ConfigError(os.str());
    }
    const double fx = (x - origin_x_) / cell_;
    const double fy = (y - origin_y_) / cell_;
    const auto c0 = std::min<Eigen::Index>(static_cast<Eigen::Index>(fx), heights_.cols() - 2);
    const auto r0 = std::min<Eigen::Index>(static_cast<Eigen::Index>(fy), heights_.rows() - 2);
    const double tx = fx - static_cast<double>(c0);
    const double ty = fy - static_cast<double>(r0);
    const double h00 = heights_(r0, c0);
    const double h01 = heights_(r0, c0 + 1);
    const double h10 = heights_(r0 + 1, c0);
    const double h11 = heights_(r0 + 1, c0 + 1);
    return (1.0 - ty) * ((1.0 - tx) * h00 + tx * h01) + ty * ((1.0 - tx) * h10 + tx * h11);
}

void Terrain::add_block(double cx, double cy, double half_size, double top) {
    for (Eigen::Index r = 0; r < heights_.rows(); ++r) {
        const double y = origin_y_ + cell_ * static_cast<double>(r);
        if (std::abs(y - cy) > half_size + 1e-9) continue;
        for (Eigen::Index c = 0; c < heights_.cols(); ++c) {
            const double x = origin_x_ + cell_ * static_cast<double>(c);
            if (std::abs(x - cx) > half_size + 1e-9) continue;
            heights_(r, c) = std::max(heights_(r, c), top);
        }
    }
}

Terrain make_foot_block_terrain(std::span<const Vec3> feet_world, const FootBlockSpec& spec,
                                std::mt19937_64& rng, std::span<double> heights_out) {
    Terrain t = Terrain::flat(spec.half_extent, spec.cell_size);
    std::uniform_real_distribution<double> height(0.0, spec.max_step);
    for (std::size_t i = 0; i < feet_world.size(); ++i) {
        const double h = height(rng);
        if (i < heights_out.size()) heights_out[i] = h;
        t.add_block(feet_world[i].x(), feet_world[i].y(), spec.block_half_size, h);
    }
    return t;
}

}  // namespace morpho
