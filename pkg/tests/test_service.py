import pytest
from fastapi.testclient import TestClient

from dcpoly.poly import Polynomial
from dcpoly.service import app


@pytest.fixture(scope="module")
def client():
    return TestClient(app)


def poly_payload(p: Polynomial) -> dict:
    return p.to_json_dict()


QUADRATIC = Polynomial(3, {(2, 0, 0): 8, (0, 2, 0): -2, (0, 0, 2): -8})


class TestHealth:
    def test_healthz(self, client):
        assert client.get("/healthz").json() == {"status": "ok"}


class TestDecomposeEndpoint:
    def test_lambda_max_point(self, client):
        body = {"f": poly_payload(QUADRATIC), "objective": "lmax-point",
                "cone": "sos", "point": [0.0, 0.0, 0.0]}
        resp = client.post("/decompose", json=body)
        assert resp.status_code == 200
        data = resp.json()
        assert abs(data["objective_value"] - 16.0) <= 1e-4
        g = Polynomial.from_json_dict(data["g"])
        h = Polynomial.from_json_dict(data["h"])
        assert g - h == QUADRATIC

    def test_unknown_objective_422(self, client):
        body = {"f": poly_payload(QUADRATIC), "objective": "nope"}
        assert client.post("/decompose", json=body).status_code == 422

    def test_missing_point_422(self, client):
        body = {"f": poly_payload(QUADRATIC), "objective": "lmax-point"}
        assert client.post("/decompose", json=body).status_code == 422

    def test_bad_polynomial_shape_422(self, client):
        body = {"f": {"n": 2, "degree": 2, "mode": "rational",
                      "terms": [{"exp": [1], "coef": "1/1"}]},
                "objective": "feasibility"}
        assert client.post("/decompose", json=body).status_code == 422


class TestConvexityEndpoints:
    def test_convex_polynomial(self, client):
        p = Polynomial(2, {(2, 0): 1, (0, 2): 1})
        resp = client.post("/check-convexity",
                           json={"f": poly_payload(p), "cone": "dsos"})
        assert resp.status_code == 200
        data = resp.json()
        assert data["feasible"] is True and data["margin"] >= -1e-7

    def test_nonconvex_polynomial(self, client):
        p = Polynomial(2, {(4, 0): 1, (2, 2): -6, (0, 4): 1})
        resp = client.post("/check-convexity",
                           json={"f": poly_payload(p), "cone": "sos"})
        assert resp.json()["feasible"] is False

    def test_certificate_included_on_request(self, client):
        p = Polynomial(2, {(2, 0): 1, (0, 2): 1})
        resp = client.post("/check-convexity?certificate=true",
                           json={"f": poly_payload(p), "cone": "sos"})
        cert = resp.json()["certificate"]
        assert cert["cone"] == "sos" and len(cert["Q"]) == 2

    def test_membership_endpoint(self, client):
        p = Polynomial(2, {(2, 0): 1, (1, 1): 2, (0, 2): 1})
        resp = client.post("/check-membership",
                           json={"f": poly_payload(p), "cone": "dsos"})
        assert resp.json()["feasible"] is True


class TestSphereEndpoint:
    def test_even_monomial(self, client):
        resp = client.post("/integrate-sphere", json={"exponent": [2, 2, 0]})
        data = resp.json()
        assert data["exact"] == "4/15*pi"
        assert abs(data["normalized"] - 1 / 15) <= 1e-12

    def test_odd_monomial(self, client):
        resp = client.post("/integrate-sphere", json={"exponent": [1, 0]})
        assert resp.json()["value"] == 0.0


class TestInteriorEndpoint:
    def test_construct(self, client):
        resp = client.post("/construct-interior", json={"n": 2, "degree": 4})
        data = resp.json()
        assert data["identity_exact"] is True
        assert data["dd_margin"] == "2"

    def test_bad_degree(self, client):
        assert client.post("/construct-interior",
                           json={"n": 2, "degree": 5}).status_code == 422


class TestGenInstanceEndpoint:
    def test_deterministic(self, client):
        body = {"n": 2, "degree": 4, "seed": 11}
        a = client.post("/gen-instance", json=body).json()
        b = client.post("/gen-instance", json=body).json()
        assert a == b
        p = Polynomial.from_json_dict(a)
        assert p.terms[(4, 0)] == 1


class TestMinimizeEndpoint:
    def test_seeded_ball_run(self, client):
        body = {"n": 1, "degree": 4, "seed": 2, "radius": 4.0,
                "budget_s": 20.0, "objective": "feasibility"}
        resp = client.post("/minimize", json=body)
        assert resp.status_code == 200
        data = resp.json()
        values = [data["f0_at_x0"]] + [it["f0"] for it in data["iterates"]]
        assert all(b <= a + 1e-5 for a, b in zip(values, values[1:]))

    def test_needs_objective_source(self, client):
        assert client.post("/minimize", json={}).status_code == 422


class TestScanEndpoint:
    def test_tiny_grid(self, client):
        body = {"c": 0.0, "a_min": 0.0, "a_max": 0.0,
                "b_min": 0.0, "b_max": 0.0, "step": 1.0}
        resp = client.post("/scan-family", json=body)
        points = resp.json()
        assert len(points) == 1 and points[0]["level"] == "dsos"
