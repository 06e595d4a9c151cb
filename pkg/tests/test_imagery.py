import numpy as np
import pytest
from PIL import Image

from rototrack.imagery import Frame, FrameError, list_frames, load_frame, row_prefix


def test_constant_image_zero_gradient(tmp_path):
    arr = np.full((2, 2), 128, dtype=np.uint8)
    Image.fromarray(arr, mode="L").save(tmp_path / "c.png")
    frame = load_frame(tmp_path / "c.png")
    assert frame.width == 2 and frame.height == 2
    assert np.all(frame.grad_sq == 0.0)


def test_horizontal_ramp_gradient():
    n = 16
    gray = np.tile(np.arange(n) / n, (1, 1))
    frame = Frame.from_gray(gray)
    # interior central difference of x/n is 1/n
    expected = (1.0 / n) ** 2
    assert np.allclose(frame.grad_sq[0, 1:-1], expected, atol=1e-15)


def test_truncated_file_decode_error(tmp_path):
    good = tmp_path / "good.png"
    arr = (np.random.default_rng(0).random((8, 8, 3)) * 255).astype(np.uint8)
    Image.fromarray(arr).save(good)
    data = good.read_bytes()
    bad = tmp_path / "bad.png"
    bad.write_bytes(data[: len(data) // 2])
    with pytest.raises(FrameError):
        load_frame(bad)


def test_sixteen_bit_rejected(tmp_path):
    img = Image.new("I;16", (4, 4))
    img.save(tmp_path / "deep.png")
    with pytest.raises(FrameError):
        load_frame(tmp_path / "deep.png")


def test_ppm_and_pgm_supported(tmp_path):
    rgb = (np.random.default_rng(1).random((5, 7, 3)) * 255).astype(np.uint8)
    Image.fromarray(rgb).save(tmp_path / "f.ppm")
    frame = load_frame(tmp_path / "f.ppm")
    assert frame.rgb.shape == (5, 7, 3)
    assert np.allclose(frame.rgb, rgb / 255.0)
    gray = (np.random.default_rng(2).random((5, 7)) * 255).astype(np.uint8)
    Image.fromarray(gray, mode="L").save(tmp_path / "g.pgm")
    assert load_frame(tmp_path / "g.pgm").width == 7


def test_gray_is_luma_of_rgb():
    rgb = np.random.default_rng(3).random((6, 6, 3))
    frame = Frame.from_rgb(rgb)
    expected = 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]
    assert np.allclose(frame.gray, expected, atol=1e-12)


def test_grad_invariant_under_gray_shift():
    gray = np.random.default_rng(4).random((9, 11))
    f1 = Frame.from_gray(gray)
    f2 = Frame.from_gray(gray + 0.25)
    # shifted gray saturates from_rgb's [0,1] assumption nowhere relevant here
    assert np.allclose(f1.grad_sq, f2.grad_sq, atol=1e-12)


def test_list_frames_sorted(tmp_path):
    for name in ("00002.png", "00000.png", "00001.png", "notes.txt"):
        if name.endswith(".png"):
            Image.fromarray(np.zeros((2, 2), dtype=np.uint8)).save(tmp_path / name)
        else:
            (tmp_path / name).write_text("x")
    names = [p.split("/")[-1] for p in list_frames(tmp_path)]
    assert names == ["00000.png", "00001.png", "00002.png"]


def test_row_prefix_zero_plane():
    assert np.all(row_prefix(np.zeros((3, 4))).values == 0.0)


def test_row_prefix_single_row():
    out = row_prefix(np.array([[1.0, -2.0, 3.0]]))
    assert out.values.tolist() == [[1.0, -1.0, 2.0]]


def test_row_prefix_matches_naive_resummation():
    rng = np.random.default_rng(5)
    plane = rng.normal(size=(7, 5))
    out = row_prefix(plane).values
    for y in range(7):
        for x in range(5):
            assert out[y, x] == pytest.approx(plane[y, : x + 1].sum(), abs=1e-12)


def test_row_prefix_difference_recovers_source_exactly_on_integer_planes():
    rng = np.random.default_rng(6)
    plane = rng.integers(-1000, 1000, size=(11, 64)).astype(np.float64)
    out = row_prefix(plane).values
    diff = out[:, 1:] - out[:, :-1]
    assert np.array_equal(diff, plane[:, 1:])
    assert np.array_equal(out[:, 0], plane[:, 0])


def test_row_prefix_rejects_empty():
    with pytest.raises(ValueError):
        row_prefix(np.zeros((0, 3)))
