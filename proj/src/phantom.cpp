#include "nodulekit/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "nodulekit/rawct.hpp"
#include "nodulekit/rng.hpp"

namespace nodulekit::phantom {

namespace {

constexpr double kParenchymaHu = -850.0;
constexpr double kBorderAirHu = -1000.0;
constexpr double kBenignMeanHu = -100.0;
constexpr double kBenignTextureSigma = 10.0;
constexpr double kMalignantMeanHu = 40.0;
constexpr double kMalignantTextureSigma = 80.0;
constexpr double kVesselMeanHu = -30.0;
constexpr double kVesselTextureSigma = 20.0;
constexpr int kBorderVoxels = 2;

std::int16_t clamp_hu(double hu) {
    const long long r = std::llround(hu);
    if (r < -32768) return -32768;
    if (r > 32767) return 32767;
    return static_cast<std::int16_t>(r);
}

struct Ellipsoid {
    Vec3 center;      // voxel coordinates
    double rx, ry, rz;  // radii in mm
};

// Voxelizes centre-inside-ellipsoid membership.
void fill_ellipsoid(Mask3D& mask, const Ellipsoid& e, const Spacing& sp) {
    const Dims& dims = mask.dims();
    const int x0 = std::max(0, static_cast<int>(std::floor(e.center.x - e.rx / sp.sx - 1)));
    const int x1 = std::min(dims.nx - 1, static_cast<int>(std::ceil(e.center.x + e.rx / sp.sx + 1)));
    const int y0 = std::max(0, static_cast<int>(std::floor(e.center.y - e.ry / sp.sy - 1)));
    const int y1 = std::min(dims.ny - 1, static_cast<int>(std::ceil(e.center.y + e.ry / sp.sy + 1)));
    const int z0 = std::max(0, static_cast<int>(std::floor(e.center.z - e.rz / sp.sz - 1)));
    const int z1 = std::min(dims.nz - 1, static_cast<int>(std::ceil(e.center.z + e.rz / sp.sz + 1)));
    for (int z = z0; z <= z1; ++z)
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) {
                const double dx = (x - e.center.x) * sp.sx / e.rx;
                const double dy = (y - e.center.y) * sp.sy / e.ry;
                const double dz = (z - e.center.z) * sp.sz / e.rz;
                if (dx * dx + dy * dy + dz * dz <= 1.0) mask.set(x, y, z);
            }
}

// Cone from apex along dir (unit, mm space), radius tapering base_r -> 0.
void fill_cone(Mask3D& mask, const Vec3& apex_vox, const double dir[3], double length_mm,
               double base_r_mm, const Spacing& sp) {
    const Dims& dims = mask.dims();
    const double ax = apex_vox.x * sp.sx, ay = apex_vox.y * sp.sy, az = apex_vox.z * sp.sz;
    const double tx = ax + dir[0] * length_mm, ty = ay + dir[1] * length_mm,
                 tz = az + dir[2] * length_mm;
    const double pad = base_r_mm + 1.0;
    const int x0 = std::max(0, static_cast<int>(std::floor((std::min(ax, tx) - pad) / sp.sx)));
    const int x1 = std::min(dims.nx - 1,
                            static_cast<int>(std::ceil((std::max(ax, tx) + pad) / sp.sx)));
    const int y0 = std::max(0, static_cast<int>(std::floor((std::min(ay, ty) - pad) / sp.sy)));
    const int y1 = std::min(dims.ny - 1,
                            static_cast<int>(std::ceil((std::max(ay, ty) + pad) / sp.sy)));
    const int z0 = std::max(0, static_cast<int>(std::floor((std::min(az, tz) - pad) / sp.sz)));
    const int z1 = std::min(dims.nz - 1,
                            static_cast<int>(std::ceil((std::max(az, tz) + pad) / sp.sz)));
    for (int z = z0; z <= z1; ++z)
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) {
                const double px = x * sp.sx - ax, py = y * sp.sy - ay, pz = z * sp.sz - az;
                const double u = px * dir[0] + py * dir[1] + pz * dir[2];
                if (u < 0.0 || u > length_mm) continue;
                const double ox = px - u * dir[0], oy = py - u * dir[1], oz = pz - u * dir[2];
                const double rho = std::sqrt(ox * ox + oy * oy + oz * oz);
                if (rho <= base_r_mm * (1.0 - u / length_mm)) mask.set(x, y, z);
            }
}

void fill_tube(Mask3D& mask, const Vec3& start_vox, const double dir[3], double length_mm,
               double radius_mm, const Spacing& sp) {
    const Dims& dims = mask.dims();
    const double ax = start_vox.x * sp.sx, ay = start_vox.y * sp.sy, az = start_vox.z * sp.sz;
    const double tx = ax + dir[0] * length_mm, ty = ay + dir[1] * length_mm,
                 tz = az + dir[2] * length_mm;
    const double pad = radius_mm + 1.0;
    const int x0 = std::max(0, static_cast<int>(std::floor((std::min(ax, tx) - pad) / sp.sx)));
    const int x1 = std::min(dims.nx - 1,
                            static_cast<int>(std::ceil((std::max(ax, tx) + pad) / sp.sx)));
    const int y0 = std::max(0, static_cast<int>(std::floor((std::min(ay, ty) - pad) / sp.sy)));
    const int y1 = std::min(dims.ny - 1,
                            static_cast<int>(std::ceil((std::max(ay, ty) + pad) / sp.sy)));
    const int z0 = std::max(0, static_cast<int>(std::floor((std::min(az, tz) - pad) / sp.sz)));
    const int z1 = std::min(dims.nz - 1,
                            static_cast<int>(std::ceil((std::max(az, tz) + pad) / sp.sz)));
    for (int z = z0; z <= z1; ++z)
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) {
                const double px = x * sp.sx - ax, py = y * sp.sy - ay, pz = z * sp.sz - az;
                double u = px * dir[0] + py * dir[1] + pz * dir[2];
                if (u < 0.0) u = 0.0;
                if (u > length_mm) u = length_mm;
                const double ox = px - u * dir[0], oy = py - u * dir[1], oz = pz - u * dir[2];
                if (ox * ox + oy * oy + oz * oz <= radius_mm * radius_mm) mask.set(x, y, z);
            }
}

void random_unit_dir(Rng& rng, double out[3]) {
    double n2;
    do {
        out[0] = rng.normal();
        out[1] = rng.normal();
        out[2] = rng.normal();
        n2 = out[0] * out[0] + out[1] * out[1] + out[2] * out[2];
    } while (n2 < 1e-12);
    const double inv = 1.0 / std::sqrt(n2);
    out[0] *= inv;
    out[1] *= inv;
    out[2] *= inv;
}

// In-plane morphological perturbation with a 4-neighbour cross element.
Mask3D perturb_mask(const Mask3D& truth, bool dilate) {
    const Dims dims = truth.dims();
    Mask3D out(dims);
    if (dilate) {
        truth.for_each([&](int x, int y, int z) {
            out.set(x, y, z);
            if (x > 0) out.set(x - 1, y, z);
            if (x + 1 < dims.nx) out.set(x + 1, y, z);
            if (y > 0) out.set(x, y - 1, z);
            if (y + 1 < dims.ny) out.set(x, y + 1, z);
        });
    } else {
        truth.for_each([&](int x, int y, int z) {
            const bool interior = x > 0 && truth.test(x - 1, y, z) && x + 1 < dims.nx &&
                                  truth.test(x + 1, y, z) && y > 0 && truth.test(x, y - 1, z) &&
                                  y + 1 < dims.ny && truth.test(x, y + 1, z);
            if (interior) out.set(x, y, z);
        });
    }
    return out;
}

}  // namespace

std::vector<std::vector<std::pair<int, int>>> trace_slice_contours(const Mask3D& mask, int z) {
    const Dims& dims = mask.dims();
    const auto fg = [&](int x, int y) {
        return x >= 0 && x < dims.nx && y >= 0 && y < dims.ny && mask.test(x, y, z);
    };

    // 8-connected component labelling in scan order
    std::vector<int> label(static_cast<std::size_t>(dims.nx) * dims.ny, -1);
    const auto lab = [&](int x, int y) -> int& {
        return label[static_cast<std::size_t>(y) * dims.nx + x];
    };
    std::vector<std::pair<int, int>> starts;  // topmost-leftmost pixel per component
    for (int y = 0; y < dims.ny; ++y)
        for (int x = 0; x < dims.nx; ++x) {
            if (!fg(x, y) || lab(x, y) >= 0) continue;
            const int id = static_cast<int>(starts.size());
            starts.emplace_back(x, y);
            std::deque<std::pair<int, int>> frontier{{x, y}};
            lab(x, y) = id;
            while (!frontier.empty()) {
                const auto [cx, cy] = frontier.front();
                frontier.pop_front();
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int nx = cx + dx, ny = cy + dy;
                        if ((dx || dy) && fg(nx, ny) && lab(nx, ny) < 0) {
                            lab(nx, ny) = id;
                            frontier.emplace_back(nx, ny);
                        }
                    }
            }
        }

    // Moore boundary tracing, clockwise, Jacob's stopping criterion
    static const int kDirs[8][2] = {{1, 0},  {1, 1},   {0, 1},  {-1, 1},
                                    {-1, 0}, {-1, -1}, {0, -1}, {1, -1}};
    std::vector<std::vector<std::pair<int, int>>> contours;
    for (const auto& [sx, sy] : starts) {
        std::vector<std::pair<int, int>> contour{{sx, sy}};
        bool has_neighbour = false;
        for (const auto& d : kDirs) has_neighbour = has_neighbour || fg(sx + d[0], sy + d[1]);
        if (!has_neighbour) {
            contours.push_back(std::move(contour));
            continue;
        }

        int cx = sx, cy = sy;
        int bx = sx - 1, by = sy;  // virtual entry from the west
        int first_dir = -1;
        const long limit = 8L * dims.nx * dims.ny + 8;
        for (long step = 0; step < limit; ++step) {
            int i = 0;
            for (int k = 0; k < 8; ++k)
                if (cx + kDirs[k][0] == bx && cy + kDirs[k][1] == by) i = k;
            int found = -1;
            for (int k = 1; k <= 8; ++k) {
                const int j = (i + k) % 8;
                if (fg(cx + kDirs[j][0], cy + kDirs[j][1])) {
                    found = j;
                    break;
                }
            }
            if (found < 0) break;  // unreachable: has_neighbour was checked
            if (cx == sx && cy == sy) {
                if (first_dir < 0) first_dir = found;
                else if (found == first_dir) break;  // about to repeat the first move
            }
            bx = cx + kDirs[(found + 7) % 8][0];
            by = cy + kDirs[(found + 7) % 8][1];
            cx += kDirs[found][0];
            cy += kDirs[found][1];
            contour.emplace_back(cx, cy);
        }
        if (contour.size() > 1 && contour.back() == contour.front()) contour.pop_back();
        contours.push_back(std::move(contour));
    }
    return contours;
}

PatientStudy generate_patient(const PhantomConfig& config, int patient_index) {
    if (config.readers < 1 || config.readers > 4)
        throw Error("phantom: readers must be between 1 and 4");
    if (config.n_patients < 1 || config.nodules_per_class < 1)
        throw Error("phantom: need at least 1 patient and 1 nodule per class");
    const Dims dims = config.dims;
    const Spacing sp = config.spacing;
    Rng rng(derive_seed(config.seed, "patient", static_cast<std::uint64_t>(patient_index)));

    PatientStudy study;
    char pid[16];
    std::snprintf(pid, sizeof pid, "PH%04d", patient_index + 1);
    study.volume.dims = dims;
    study.volume.spacing = sp;
    study.volume.patient_id = pid;
    study.volume.voxels.resize(dims.count());

    // parenchyma background with an air border shell
    std::size_t i = 0;
    for (int z = 0; z < dims.nz; ++z)
        for (int y = 0; y < dims.ny; ++y)
            for (int x = 0; x < dims.nx; ++x, ++i) {
                const bool border = x < kBorderVoxels || x >= dims.nx - kBorderVoxels ||
                                    y < kBorderVoxels || y >= dims.ny - kBorderVoxels ||
                                    z < kBorderVoxels || z >= dims.nz - kBorderVoxels;
                const double base = border ? kBorderAirHu : kParenchymaHu;
                study.volume.voxels[i] = clamp_hu(base + rng.normal(0.0, config.noise_sigma));
            }

    // margins depend on each object's own extent so small nodules keep the
    // whole placement box available; +3 mm covers reader dilation and the
    // outer rim
    std::vector<Vec3> centres;
    std::vector<double> extents;  // mm, for separation checks
    const auto place = [&](double extent_mm) {
        const int margin_x = static_cast<int>(std::ceil((extent_mm + 3.0) / sp.sx)) + 2;
        const int margin_y = static_cast<int>(std::ceil((extent_mm + 3.0) / sp.sy)) + 2;
        const int margin_z = static_cast<int>(std::ceil((extent_mm + 3.0) / sp.sz)) + 2;
        if (2 * margin_x >= dims.nx || 2 * margin_y >= dims.ny || 2 * margin_z >= dims.nz)
            throw Error("phantom: volume dims too small for the nodule size range");
        for (int attempt = 0; attempt < 2000; ++attempt) {
            Vec3 c{static_cast<double>(margin_x) +
                       rng.uniform() * (dims.nx - 2.0 * margin_x),
                   static_cast<double>(margin_y) +
                       rng.uniform() * (dims.ny - 2.0 * margin_y),
                   static_cast<double>(margin_z) +
                       rng.uniform() * (dims.nz - 2.0 * margin_z)};
            bool ok = true;
            for (std::size_t k = 0; k < centres.size() && ok; ++k) {
                const double dx = (c.x - centres[k].x) * sp.sx;
                const double dy = (c.y - centres[k].y) * sp.sy;
                const double dz = (c.z - centres[k].z) * sp.sz;
                const double min_gap = extent_mm + extents[k] + 4.0;
                ok = dx * dx + dy * dy + dz * dz >= min_gap * min_gap;
            }
            if (ok) {
                centres.push_back(c);
                extents.push_back(extent_mm);
                return c;
            }
        }
        throw Error("phantom: could not place a nodule; reduce counts or enlarge dims");
    };

    // malignant-like nodules are placed first: their margin box is the
    // narrowest, so the largest objects claim space before small ones
    const int n_nodules = 2 * config.nodules_per_class;
    for (int n = 0; n < n_nodules; ++n) {
        const bool malignant = n < config.nodules_per_class;
        Ellipsoid e;
        if (malignant) {
            e.rx = rng.uniform(6.0, 12.0);
            e.ry = rng.uniform(6.0, 12.0);
            e.rz = rng.uniform(6.0, 12.0);
        } else {
            e.rx = rng.uniform(3.0, 6.0);
            e.ry = rng.uniform(3.0, 6.0);
            e.rz = rng.uniform(3.0, 6.0);
        }
        const double extent = std::max({e.rx, e.ry, e.rz}) + (malignant ? 6.0 : 0.0);
        e.center = place(extent);

        Mask3D mask(dims);
        fill_ellipsoid(mask, e, sp);
        if (malignant) {
            const int n_spicules = 4 + static_cast<int>(rng.uniform_int(7));
            for (int s = 0; s < n_spicules; ++s) {
                double dir[3];
                random_unit_dir(rng, dir);
                // apex on the ellipsoid surface along dir
                const double scale = 1.0 / std::sqrt(dir[0] * dir[0] / (e.rx * e.rx) +
                                                     dir[1] * dir[1] / (e.ry * e.ry) +
                                                     dir[2] * dir[2] / (e.rz * e.rz));
                // pull the apex slightly inside so the cone stays attached
                const Vec3 apex{e.center.x + 0.9 * scale * dir[0] / sp.sx,
                                e.center.y + 0.9 * scale * dir[1] / sp.sy,
                                e.center.z + 0.9 * scale * dir[2] / sp.sz};
                fill_cone(mask, apex, dir, rng.uniform(3.0, 6.0), rng.uniform(1.2, 2.0), sp);
            }
        }

        const double mean = malignant ? kMalignantMeanHu : kBenignMeanHu;
        const double sigma = malignant ? kMalignantTextureSigma : kBenignTextureSigma;
        double hu_sum = 0.0;
        std::vector<std::tuple<int, int, int>> voxels;
        mask.for_each([&](int x, int y, int z) { voxels.emplace_back(x, y, z); });
        for (const auto& [x, y, z] : voxels) {
            const double hu = mean + rng.normal(0.0, sigma);
            study.volume.voxels[dims.index(x, y, z)] = clamp_hu(hu);
            hu_sum += static_cast<double>(study.volume.voxels[dims.index(x, y, z)]);
        }

        NoduleTruth truth;
        truth.patient_id = pid;
        truth.malignant = malignant;
        truth.centroid = mask.center_of_mass();
        truth.mean_hu_in_mask = hu_sum / static_cast<double>(mask.voxel_count());
        truth.voxel_count = mask.voxel_count();
        study.nodules.push_back(truth);
        study.truth_masks.push_back(std::move(mask));
    }

    // vessel-like bright tubes; their midpoints become non-nodule loci. The
    // tube is anchored at its centre and may clip at the borders; the centre
    // must clear every nodule along the whole segment.
    for (int v = 0; v < config.non_nodules_per_patient; ++v) {
        const double radius = rng.uniform(1.0, 1.5);
        double length = rng.uniform(20.0, 40.0);
        const int cm_x = static_cast<int>(std::ceil(6.0 / sp.sx));
        const int cm_y = static_cast<int>(std::ceil(6.0 / sp.sy));
        const int cm_z = static_cast<int>(std::ceil(5.0 / sp.sz));

        Vec3 centre;
        double dir[3];
        bool placed = false;
        for (int attempt = 0; attempt < 2000 && !placed; ++attempt) {
            centre = {cm_x + rng.uniform() * (dims.nx - 2.0 * cm_x),
                      cm_y + rng.uniform() * (dims.ny - 2.0 * cm_y),
                      cm_z + rng.uniform() * (dims.nz - 2.0 * cm_z)};
            random_unit_dir(rng, dir);
            dir[2] *= 0.3;  // flatten so the tube mostly runs in-plane
            const double norm = std::sqrt(dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]);
            for (double& d : dir) d /= norm;

            placed = true;
            const double cx = centre.x * sp.sx, cy = centre.y * sp.sy, cz = centre.z * sp.sz;
            for (std::size_t k = 0; k < centres.size() && placed; ++k) {
                // distance from the nodule centre to the tube segment
                const double px = centres[k].x * sp.sx - cx;
                const double py = centres[k].y * sp.sy - cy;
                const double pz = centres[k].z * sp.sz - cz;
                double u = px * dir[0] + py * dir[1] + pz * dir[2];
                if (u < -length / 2.0) u = -length / 2.0;
                if (u > length / 2.0) u = length / 2.0;
                const double ox = px - u * dir[0], oy = py - u * dir[1], oz = pz - u * dir[2];
                const double gap = extents[k] + radius + 3.0;
                placed = ox * ox + oy * oy + oz * oz >= gap * gap;
            }
            if (!placed && attempt == 999) length /= 2.0;  // crowded volume: shorter vessel
        }
        if (!placed) throw Error("phantom: could not place a vessel; reduce counts");

        const Vec3 start{centre.x - 0.5 * length * dir[0] / sp.sx,
                         centre.y - 0.5 * length * dir[1] / sp.sy,
                         centre.z - 0.5 * length * dir[2] / sp.sz};
        Mask3D tube(dims);
        fill_tube(tube, start, dir, length, radius, sp);
        tube.for_each([&](int x, int y, int z) {
            study.volume.voxels[dims.index(x, y, z)] =
                clamp_hu(kVesselMeanHu + rng.normal(0.0, kVesselTextureSigma));
        });

        LocusTruth locus;
        locus.patient_id = pid;
        locus.position = {static_cast<int>(std::llround(centre.x)),
                          static_cast<int>(std::llround(centre.y)),
                          static_cast<int>(std::llround(centre.z))};
        study.loci.push_back(locus);
    }

    // reader sessions: perturbed masks, edge-map ROIs, ratings
    study.annotations.patient_id = pid;
    for (int r = 0; r < config.readers; ++r) {
        ReadingSession session;
        for (int n = 0; n < n_nodules; ++n) {
            const bool malignant = n < config.nodules_per_class;
            Mask3D reader_mask = perturb_mask(study.truth_masks[static_cast<std::size_t>(n)],
                                              rng.bernoulli(0.5));
            if (reader_mask.empty())
                reader_mask = study.truth_masks[static_cast<std::size_t>(n)];

            NoduleReading reading;
            reading.nodule_id = "s" + std::to_string(r) + "_n" + std::to_string(n);
            reading.malignancy = malignant ? (rng.bernoulli(0.3) ? 4 : 5)
                                           : (rng.bernoulli(0.2) ? 2 : 1);
            for (int z = 0; z < dims.nz; ++z) {
                for (auto& contour : trace_slice_contours(reader_mask, z)) {
                    Roi roi;
                    roi.slice_index = z;
                    roi.vertices = std::move(contour);
                    reading.rois.push_back(std::move(roi));
                }
            }
            session.nodules.push_back(std::move(reading));
        }
        if (r == 0)
            for (const LocusTruth& locus : study.loci)
                session.non_nodules.push_back(locus.position);
        study.annotations.sessions.push_back(std::move(session));
    }
    return study;
}

PhantomManifest generate_phantom(const PhantomConfig& config,
                                 const std::filesystem::path& out_dir, int threads) {
    std::filesystem::create_directories(out_dir);
    std::vector<PhantomManifest> parts(static_cast<std::size_t>(config.n_patients));

    const auto run_patient = [&](int p) {
        const PatientStudy study = generate_patient(config, p);
        const std::string base = study.volume.patient_id;
        write_volume(study.volume, out_dir / (base + ".rawct"));
        const std::string xml = serialize_annotations(study.annotations);
        std::ofstream xml_out(out_dir / (base + ".xml"), std::ios::binary | std::ios::trunc);
        if (!xml_out) throw IoError("cannot write " + (out_dir / (base + ".xml")).string());
        xml_out << xml << "\n";

        PhantomManifest& part = parts[static_cast<std::size_t>(p)];
        part.rawct_files.push_back(base + ".rawct");
        part.xml_files.push_back(base + ".xml");
        part.nodules = study.nodules;
        part.loci = study.loci;
    };

    if (threads <= 1) {
        for (int p = 0; p < config.n_patients; ++p) run_patient(p);
    } else {
        std::vector<std::thread> pool;
        const int chunk = (config.n_patients + threads - 1) / threads;
        for (int w = 0; w < threads; ++w) {
            const int from = w * chunk, to = std::min(config.n_patients, from + chunk);
            if (from < to)
                pool.emplace_back([&, from, to] { for (int p = from; p < to; ++p) run_patient(p); });
        }
        for (auto& th : pool) th.join();
    }

    PhantomManifest manifest;
    for (const PhantomManifest& part : parts) {
        manifest.rawct_files.insert(manifest.rawct_files.end(), part.rawct_files.begin(),
                                    part.rawct_files.end());
        manifest.xml_files.insert(manifest.xml_files.end(), part.xml_files.begin(),
                                  part.xml_files.end());
        manifest.nodules.insert(manifest.nodules.end(), part.nodules.begin(),
                                part.nodules.end());
        manifest.loci.insert(manifest.loci.end(), part.loci.begin(), part.loci.end());
    }

    nlohmann::json nodules = nlohmann::json::array();
    for (const NoduleTruth& n : manifest.nodules)
        nodules.push_back({{"patient_id", n.patient_id},
                           {"class", n.malignant ? "malignant_like" : "benign_like"},
                           {"centroid", {n.centroid.x, n.centroid.y, n.centroid.z}},
                           {"mean_hu_in_mask", n.mean_hu_in_mask},
                           {"voxel_count", n.voxel_count}});
    nlohmann::json loci = nlohmann::json::array();
    for (const LocusTruth& l : manifest.loci)
        loci.push_back({{"patient_id", l.patient_id},
                        {"position", {l.position.x, l.position.y, l.position.z}}});
    const nlohmann::json body = {
        {"config",
         {{"n_patients", config.n_patients},
          {"nodules_per_class", config.nodules_per_class},
          {"non_nodules_per_patient", config.non_nodules_per_patient},
          {"dims", {config.dims.nx, config.dims.ny, config.dims.nz}},
          {"spacing_mm", {config.spacing.sx, config.spacing.sy, config.spacing.sz}},
          {"noise_sigma", config.noise_sigma},
          {"readers", config.readers},
          {"seed", config.seed}}},
        {"rawct_files", manifest.rawct_files},
        {"xml_files", manifest.xml_files},
        {"nodules", nodules},
        {"non_nodules", loci}};

    std::ofstream out(out_dir / "manifest.json", std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write manifest.json");
    out << body.dump(2) << "\n";
    return manifest;
}

}  // namespace nodulekit::phantom
