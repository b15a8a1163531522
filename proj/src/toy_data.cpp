#include "garmentgen/toy_data.hpp"

#include <algorithm>
#include <cmath>

namespace garmentgen {

const std::vector<NamedColor>& garment_palette() {
    static const std::vector<NamedColor> p{
        {"red", {0.8, -0.6, -0.6}},    {"blue", {-0.6, -0.4, 0.8}},   {"green", {-0.5, 0.6, -0.5}},
        {"yellow", {0.8, 0.7, -0.6}},  {"purple", {0.3, -0.5, 0.6}},  {"orange", {0.9, 0.2, -0.7}},
        {"black", {-0.9, -0.9, -0.9}}, {"white", {0.9, 0.9, 0.9}},
    };
    return p;
}

const std::vector<std::string>& garment_categories() {
    static const std::vector<std::string> c{"t-shirt", "dress", "tank top"};
    return c;
}

const std::vector<std::string>& texture_families() {
    static const std::vector<std::string> t{"solid", "striped", "checkered"};
    return t;
}

const std::vector<NamedColor>& scene_palette() {
    static const std::vector<NamedColor> s{
        {"park", {-0.3, 0.3, -0.4}}, {"beach", {0.6, 0.4, 0.0}},       {"street", {-0.1, -0.1, -0.1}},
        {"studio", {0.5, 0.5, 0.5}}, {"night city", {-0.7, -0.7, -0.3}},
    };
    return s;
}

const std::vector<NamedColor>& hair_palette() {
    static const std::vector<NamedColor> h{
        {"black", {-0.95, -0.95, -0.9}}, {"brown", {-0.2, -0.5, -0.7}}, {"blonde", {0.7, 0.5, -0.2}}};
    return h;
}

namespace {

const std::vector<std::string> kPersons{"woman", "man", "person"};
constexpr Rgb kSkinColor{0.6, 0.2, 0.0};
constexpr Rgb kOtherColor{-0.5, -0.5, -0.3};
constexpr Rgb kFlatLayBackground{0.7, 0.7, 0.7};

bool in_box(double u, double v, double u0, double u1, double v0, double v1) {
    return u >= u0 && u <= u1 && v >= v0 && v <= v1;
}

bool garment_at(int category, double u, double v) {
    const bool torso = in_box(u, v, 0.30, 0.70, 0.30, 0.66);
    switch (category) {
        case 0:  // t-shirt: torso plus short sleeves
            return torso || in_box(u, v, 0.18, 0.30, 0.30, 0.44) || in_box(u, v, 0.70, 0.82, 0.30, 0.44);
        case 1:  // dress: torso plus skirt
            return torso || in_box(u, v, 0.28, 0.72, 0.66, 0.85);
        default:  // tank top: narrow torso
            return in_box(u, v, 0.33, 0.67, 0.30, 0.66);
    }
}

ParseLabel body_label(double u, double v) {
    const double dh = std::hypot(u - 0.5, v - 0.17);
    if (dh <= 0.15) return v < 0.13 ? kHair : kSkin;
    if (in_box(u, v, 0.45, 0.55, 0.27, 0.30)) return kSkin;  // neck
    if (in_box(u, v, 0.30, 0.70, 0.30, 0.66)) return kSkin;  // torso under garment
    if (in_box(u, v, 0.18, 0.30, 0.30, 0.62) || in_box(u, v, 0.70, 0.82, 0.30, 0.62)) return kSkin;
    if (in_box(u, v, 0.34, 0.48, 0.66, 0.97) || in_box(u, v, 0.52, 0.66, 0.66, 0.97)) return kOther;
    return kBackground;
}

struct Joint {
    double u, v;
};
const std::vector<Joint> kJoints{{0.5, 0.18},  {0.5, 0.30},  {0.30, 0.32}, {0.70, 0.32}, {0.24, 0.47},
                                 {0.76, 0.47}, {0.24, 0.60}, {0.76, 0.60}, {0.41, 0.66}, {0.59, 0.66},
                                 {0.41, 0.80}, {0.59, 0.80}, {0.41, 0.94}, {0.59, 0.94}};

void put(Tensor& img, int c0, int y, int x, const Rgb& rgb) {
    for (int c = 0; c < 3; ++c) img.at(c0 + c, y, x) = rgb[c];
}

}  // namespace

FigureSpec FigureSpec::random(std::mt19937_64& rng) {
    auto pick = [&](std::size_t n) { return static_cast<int>(rng() % n); };
    FigureSpec s;
    s.category = pick(garment_categories().size());
    s.texture = pick(texture_families().size());
    s.color = pick(garment_palette().size());
    s.accent = (s.color + 1 + pick(garment_palette().size() - 1)) % static_cast<int>(garment_palette().size());
    s.scene = pick(scene_palette().size());
    s.hair = pick(hair_palette().size());
    s.person = pick(kPersons.size());
    return s;
}

std::string FigureSpec::category_name() const { return garment_categories().at(category); }
std::string FigureSpec::texture_name() const { return texture_families().at(texture); }
std::string FigureSpec::color_name() const { return garment_palette().at(color).name; }

std::string FigureSpec::garment_description() const {
    std::string d = color_name() + " ";
    if (texture != 0) d += texture_name() + " ";
    return d + category_name();
}

std::string FigureSpec::target_prompt() const {
    return "a " + kPersons.at(person) + " with " + hair_palette().at(hair).name + " hair in a " +
           scene_palette().at(scene).name;
}

Rgb texture_color(int texture, const Rgb& base, const Rgb& accent, int gx, int gy) {
    switch (texture) {
        case 1: return gy % 2 == 0 ? base : accent;
        case 2: return (gx + gy) % 2 == 0 ? base : accent;
        default: return base;
    }
}

std::vector<std::uint8_t> garment_silhouette(int category, int grid, bool flat_lay) {
    std::vector<std::uint8_t> sil(static_cast<std::size_t>(grid) * grid);
    // The flat lay is shifted up so the garment sits centred in the frame.
    const double dv = flat_lay ? 0.10 : 0.0;
    for (int gy = 0; gy < grid; ++gy)
        for (int gx = 0; gx < grid; ++gx) {
            const double u = (gx + 0.5) / grid, v = (gy + 0.5) / grid + dv;
            sil[static_cast<std::size_t>(gy) * grid + gx] = garment_at(category, u, v) ? 1 : 0;
        }
    return sil;
}

ToyScene render_scene(const FigureSpec& spec, int size, int grid) {
    if (grid < 8 || size % grid != 0) throw ParameterError("render_scene: size must be a multiple of grid >= 8");
    const int block = size / grid;
    // Texture lattice coordinates are pinned to an 8-cell pattern frequency
    // so stripes and checks look the same at every resolution.
    auto lattice = [&](int g) { return g * 8 / grid; };

    ToyScene s;
    s.spec = spec;
    Tensor person({3, size, size}), garment({3, size, size}), parse({1, size, size}), dense({2, size, size}),
        keys({1, size, size}), gmask({1, size, size});
    const Rgb base = garment_palette().at(spec.color).rgb, accent = garment_palette().at(spec.accent).rgb;
    const Rgb bg = scene_palette().at(spec.scene).rgb, hair = hair_palette().at(spec.hair).rgb;
    const auto worn = garment_silhouette(spec.category, grid, false);
    const auto flat = garment_silhouette(spec.category, grid, true);
    // Flat-lay cells map back to the worn cell one shift higher so the
    // product shot shows exactly the worn texture.
    const int shift = static_cast<int>(std::lround(0.10 * grid));

    for (int gy = 0; gy < grid; ++gy)
        for (int gx = 0; gx < grid; ++gx) {
            const double u = (gx + 0.5) / grid, v = (gy + 0.5) / grid;
            ParseLabel label = body_label(u, v);
            if (worn[static_cast<std::size_t>(gy) * grid + gx]) label = kGarment;
            Rgb rgb = bg;
            switch (label) {
                case kSkin: rgb = kSkinColor; break;
                case kHair: rgb = hair; break;
                case kOther: rgb = kOtherColor; break;
                case kGarment: rgb = texture_color(spec.texture, base, accent, lattice(gx), lattice(gy)); break;
                default: break;
            }
            const bool on_flat = flat[static_cast<std::size_t>(gy) * grid + gx] != 0;
            const Rgb flat_rgb =
                on_flat ? texture_color(spec.texture, base, accent, lattice(gx), lattice(gy + shift)) : kFlatLayBackground;
            const double du = std::clamp((u - 0.15) / 0.7, 0.0, 1.0), dvv = std::clamp((v - 0.02) / 0.96, 0.0, 1.0);

            for (int by = 0; by < block; ++by)
                for (int bx = 0; bx < block; ++bx) {
                    const int y = gy * block + by, x = gx * block + bx;
                    put(person, 0, y, x, rgb);
                    put(garment, 0, y, x, flat_rgb);
                    parse.at(0, y, x) = label;
                    gmask.at(0, y, x) = label == kGarment ? 1.0 : 0.0;
                    if (label != kBackground) {
                        dense.at(0, y, x) = du;
                        dense.at(1, y, x) = dvv;
                    }
                }
        }
    for (const auto& j : kJoints) {
        const int gx = std::min(grid - 1, static_cast<int>(j.u * grid));
        const int gy = std::min(grid - 1, static_cast<int>(j.v * grid));
        for (int by = 0; by < block; ++by)
            for (int bx = 0; bx < block; ++bx) keys.at(0, gy * block + by, gx * block + bx) = 1.0;
    }
    s.person = {std::move(person), Space::pixel};
    s.garment = {std::move(garment), Space::pixel};
    s.parse = std::move(parse);
    s.dense = {std::move(dense), PoseKind::dense_coords};
    s.keypoints = {std::move(keys), PoseKind::keypoint_render};
    s.garment_mask = std::move(gmask);
    return s;
}

}  // namespace garmentgen
