#ifndef SPZEROS_TOOLS_PNG_WRITER_HPP
#define SPZEROS_TOOLS_PNG_WRITER_HPP

#include <cstdio>
#include <string>

#include <png.h>

#include <spzeros/cli.hpp>

// 8-bit grayscale PNG via libpng.
inline void write_png(const std::string &path, const spzeros::raster &img)
{
    std::FILE *fp = std::fopen(path.c_str(), "wb");
    if (!fp) {
        throw spzeros::error(spzeros::errc::invalid_argument, "cannot open '" + path + "' for writing");
    }
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info || setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw spzeros::error(spzeros::errc::invalid_argument, "libpng failed writing '" + path + "'");
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < img.height; ++y) {
        png_write_row(png, img.pixels.data() + static_cast<std::size_t>(y) * img.width);
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

#endif
