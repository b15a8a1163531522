#pragma once

// Procedural figures wearing textured garments. Every label (parse map,
// dense coordinates, keypoints, garment region) is derived analytically from
// the same figure description, so ground truth is exact.
//
// Figures are described in normalized [0,1] coordinates and rasterized on a
// `grid` x `grid` lattice that is then nearest-upsampled to `size` pixels.
// With grid = size / codec_factor the images are block-constant, which makes
// the toy codec lossless on them.

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "garmentgen/backbone.hpp"
#include "garmentgen/controlnet.hpp"

namespace garmentgen {

enum ParseLabel : int { kBackground = 0, kSkin = 1, kHair = 2, kGarment = 3, kOther = 4 };

using Rgb = std::array<double, 3>;

struct NamedColor {
    std::string name;
    Rgb rgb;  // in [-1,1]
};

const std::vector<NamedColor>& garment_palette();
const std::vector<std::string>& garment_categories();  // "t-shirt", "dress", "tank top"
const std::vector<std::string>& texture_families();    // "solid", "striped", "checkered"
const std::vector<NamedColor>& scene_palette();        // scene name -> background colour
const std::vector<NamedColor>& hair_palette();

struct FigureSpec {
    int category = 0;
    int texture = 0;
    int color = 0;
    int accent = 1;  // second colour for patterned textures
    int scene = 0;
    int hair = 0;
    int person = 0;  // index into {"woman", "man", "person"}

    static FigureSpec random(std::mt19937_64& rng);

    std::string category_name() const;
    std::string texture_name() const;
    std::string color_name() const;
    std::string garment_description() const;  // "red striped t-shirt"
    std::string target_prompt() const;        // subject, hair and scene
};

struct ToyScene {
    FigureSpec spec;
    LatentTensor person;   // [3,size,size] pixel space
    LatentTensor garment;  // flat-lay product shot of the same garment
    Tensor parse;          // [1,size,size] labels
    PoseMap dense;         // dense_coords
    PoseMap keypoints;     // keypoint_render
    Tensor garment_mask;   // [1,size,size], 1 on garment pixels
};

ToyScene render_scene(const FigureSpec& spec, int size, int grid);

/// Garment texture colour at a lattice cell, shared by the renderer and the
/// mock inpainter so both paint identical patterns.
Rgb texture_color(int texture, const Rgb& base, const Rgb& accent, int gx, int gy);

/// Rasterized garment silhouette (1 inside) at lattice resolution for the
/// worn (on-body) or flat-lay placement.
std::vector<std::uint8_t> garment_silhouette(int category, int grid, bool flat_lay);

}  // namespace garmentgen
