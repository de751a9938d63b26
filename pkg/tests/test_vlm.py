import io

import numpy as np
import pytest
from PIL import Image

from afford3d.core import InteractionQuery
from afford3d.errors import (
    BackendUnavailable,
    DecodeError,
    DegenerateImage,
    ObjectNotFound,
    ProtocolError,
)
from afford3d.neural import generate_bundle
from afford3d.vlm import (
    NUM_PATCHES,
    PATCH_DIM,
    OracleBackend,
    RemoteBackend,
    ToyBackend,
    encode_image,
    encode_text,
    encode_tokens,
    patchify,
)
from oracles import o_encode_stack, o_matmul, o_add_bias


def png_bytes(arr):
    buf = io.BytesIO()
    Image.fromarray(arr.astype(np.uint8), "RGB").save(buf, format="PNG")
    return buf.getvalue()


QUERY = InteractionQuery("sit", "sofa", "sit on the sofa")


class TestPatchify:
    def test_uniform_gray(self):
        img = png_bytes(np.full((64, 64, 3), 128))
        grid = patchify(img)
        assert grid.patches.shape == (NUM_PATCHES, PATCH_DIM)
        np.testing.assert_allclose(grid.patches, 128 / 255, atol=1e-12)

    def test_no_resize_top_left_patch(self):
        rng = np.random.Generator(np.random.PCG64(20))
        arr = rng.integers(0, 256, (224, 224, 3))
        grid = patchify(png_bytes(arr))
        expected = arr[:16, :16, :].reshape(-1) / 255.0
        np.testing.assert_allclose(grid.patches[0], expected, atol=1e-12)

    def test_checkerboard_downsample_matches_averaging_oracle(self):
        # 1-px checkerboard at 448x448: every 2x2 block averages to 127.5
        idx = np.indices((448, 448)).sum(axis=0) % 2
        arr = np.repeat((idx * 255)[:, :, None], 3, axis=2)
        grid = patchify(png_bytes(arr))
        np.testing.assert_allclose(grid.patches, 127.5 / 255, atol=1 / 255)

    def test_undecodable(self):
        with pytest.raises(DecodeError):
            patchify(b"not an image")

    def test_too_small(self):
        with pytest.raises(DegenerateImage):
            patchify(png_bytes(np.zeros((8, 8, 3))))


@pytest.fixture(scope="module")
def weights():
    return generate_bundle(1, d=8, h=2, layers=2, text_vocab=["sit", "sofa", "door"])


class TestEncoders:
    def test_encode_image_deterministic(self, weights):
        img = png_bytes(np.arange(64 * 64 * 3).reshape(64, 64, 3) % 256)
        a = encode_image(patchify(img), weights)
        b = encode_image(patchify(img), weights)
        np.testing.assert_array_equal(a.vector, b.vector)

    def test_token_length_is_d(self, weights):
        img = png_bytes(np.full((32, 32, 3), 10))
        assert encode_image(patchify(img), weights).vector.shape == (8,)

    def test_encode_image_matches_scalar_oracle(self, weights):
        img = png_bytes(np.full((32, 32, 3), 77))
        grid = patchify(img)
        out = encode_image(grid, weights)
        x = o_add_bias(
            o_matmul(grid.patches.tolist(), weights["vlm.patch_proj.w"].tolist()),
            weights["vlm.patch_proj.b"].tolist(),
        )
        expected = o_encode_stack(x, weights, "vlm.vis", 2, 2)
        np.testing.assert_allclose(out.vector, expected, atol=1e-9)

    def test_encode_text_deterministic(self, weights):
        a = encode_text(QUERY, weights)
        b = encode_text(QUERY, weights)
        np.testing.assert_array_equal(a.vector, b.vector)

    def test_distinct_tokens_distinct_embeddings(self, weights):
        a = encode_text(InteractionQuery("sit", "sofa", ""), weights)
        b = encode_text(InteractionQuery("sit", "door", ""), weights)
        assert not np.allclose(a.vector, b.vector)

    def test_encode_text_matches_scalar_oracle(self, weights):
        out = encode_text(QUERY, weights)
        vocab = weights.meta["text_vocab"]
        ids = [vocab.index("sit"), vocab.index("sofa")]
        x = weights["vlm.text.embed"][ids].tolist()
        expected = o_encode_stack(x, weights, "vlm.text", 2, 2)
        np.testing.assert_allclose(out.vector, expected, atol=1e-12)

    def test_unknown_token_maps_to_unk(self, weights):
        a = encode_tokens(["xyzzy"], weights)
        b = encode_tokens(["<unk>"], weights)
        np.testing.assert_array_equal(a.vector, b.vector)

    def test_outputs_finite_for_random_inputs(self, weights):
        rng = np.random.Generator(np.random.PCG64(21))
        for _ in range(10):
            img = png_bytes(rng.integers(0, 256, (48, 48, 3)))
            tok = encode_image(patchify(img), weights)
            assert np.isfinite(tok.vector).all()


class TestOracleBackend:
    def test_round_trip_over_manifest(self, fixture_manifest):
        backend = OracleBackend(fixture_manifest.annotations_by_image())
        for img in fixture_manifest.images:
            for ann in img.annotations:
                q = InteractionQuery("sit", ann.label, "")
                res = backend.ground(img.image_id, q)
                assert res.label == ann.label
                assert list(res.bbox) == ann.bbox
                assert res.confidence == 1.0

    def test_absent_object(self, fixture_manifest):
        backend = OracleBackend(fixture_manifest.annotations_by_image())
        with pytest.raises(ObjectNotFound):
            backend.ground("img_000", InteractionQuery("open", "door", ""))


class TestToyBackend:
    def test_prototype_fit_to_image_scores_high(self):
        weights = generate_bundle(2, d=8, h=2, layers=1, text_vocab=["a", "b"])
        rng = np.random.Generator(np.random.PCG64(22))
        img_a = png_bytes(rng.integers(0, 256, (32, 32, 3)))
        img_b = png_bytes(rng.integers(0, 256, (32, 32, 3)))
        token_a = encode_image(patchify(img_a), weights).vector
        backend = ToyBackend(
            weights,
            label_regions={"a": [0.1, 0.1, 0.9, 0.9], "b": [0.2, 0.2, 0.8, 0.8]},
            prototypes={"a": token_a, "b": encode_image(patchify(img_b), weights).vector},
        )
        res = backend.ground(img_a, InteractionQuery("grasp", "a", ""))
        assert res.label == "a"
        # cos(token, token) = 1 -> confidence (1+1)/2 = 1
        assert res.confidence > 0.5
        # independent similarity computation
        cos = token_a @ token_a / (np.linalg.norm(token_a) ** 2)
        assert res.confidence == pytest.approx((cos + 1) / 2)

    def test_unknown_label_raises(self):
        weights = generate_bundle(2, d=8, h=2, layers=1, text_vocab=["a"])
        backend = ToyBackend(weights, label_regions={"a": [0, 0, 1, 1]}, prototypes={})
        with pytest.raises(ObjectNotFound):
            backend.ground(b"", InteractionQuery("grasp", "zeppelin", ""))

    def test_bbox_always_valid(self, fixture_manifest):
        weights = generate_bundle(2, d=8, h=2, layers=1, text_vocab=["bottle"])
        rng = np.random.Generator(np.random.PCG64(23))
        backend = ToyBackend(weights, label_regions=fixture_manifest.label_regions)
        img = png_bytes(rng.integers(0, 256, (32, 32, 3)))
        res = backend.ground(img, InteractionQuery("open", "bottle", ""))
        x0, y0, x1, y1 = res.bbox
        assert 0 <= x0 < x1 <= 1 and 0 <= y0 < y1 <= 1


class TestRemoteBackend:
    def _client(self, handler):
        import httpx

        return httpx.Client(transport=httpx.MockTransport(handler))

    def test_happy_path(self):
        import httpx

        def handler(request):
            assert request.url.path == "/ground"
            body = {"label": "sofa", "bbox": [0.1, 0.2, 0.5, 0.9], "confidence": 0.8}
            return httpx.Response(200, json=body)

        backend = RemoteBackend("http://det", client=self._client(handler))
        res = backend.ground(b"\x89PNG", QUERY)
        assert res.label == "sofa" and res.confidence == 0.8

    def test_non_200_is_unavailable(self):
        import httpx

        backend = RemoteBackend(
            "http://det", client=self._client(lambda r: httpx.Response(500))
        )
        with pytest.raises(BackendUnavailable):
            backend.ground(b"", QUERY)

    def test_404_is_object_not_found(self):
        import httpx

        backend = RemoteBackend(
            "http://det", client=self._client(lambda r: httpx.Response(404))
        )
        with pytest.raises(ObjectNotFound):
            backend.ground(b"", QUERY)

    def test_malformed_response(self):
        import httpx

        backend = RemoteBackend(
            "http://det",
            client=self._client(lambda r: httpx.Response(200, json={"nope": 1})),
        )
        with pytest.raises(ProtocolError):
            backend.ground(b"", QUERY)

    def test_invalid_bbox_rejected(self):
        import httpx

        def handler(request):
            return httpx.Response(
                200, json={"label": "x", "bbox": [0.9, 0.1, 0.2, 0.8], "confidence": 0.5}
            )

        backend = RemoteBackend("http://det", client=self._client(handler))
        with pytest.raises(ProtocolError):
            backend.ground(b"", QUERY)

    def test_connection_error_unavailable(self):
        import httpx

        def handler(request):
            raise httpx.ConnectError("refused")

        backend = RemoteBackend("http://det", client=self._client(handler))
        with pytest.raises(BackendUnavailable):
            backend.ground(b"", QUERY)
