"""End-to-end checks of the command-line tool. Usage: test_cli.py <path-to-esl>"""
import csv
import filecmp
import os
import subprocess
import sys
import tempfile
import unittest

ESL = None


def run(*args, expect=0):
    p = subprocess.run([ESL, *map(str, args)], capture_output=True, text=True)
    if p.returncode != expect:
        raise AssertionError(f"{args}: exit {p.returncode}, expected {expect}\n{p.stdout}\n{p.stderr}")
    return p


def rows(path):
    with open(path, newline="") as f:
        return list(csv.reader(f))


class Cli(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.tmp = tempfile.TemporaryDirectory()
        cls.d = cls.tmp.name
        run("phantom", "--size", 16, "--out", f"{cls.d}/gt.eslt")
        run("phantom", "--size", 16, "--blur-sigma", 1.0, "--out", f"{cls.d}/init.eslt")
        run("gen-data", "--volume", f"{cls.d}/gt.eslt", "--num-images", 8, "--snr", 0.5, "--seed", 5,
            "--voltage-kv", 200, "--out-dir", f"{cls.d}/data")

    @classmethod
    def tearDownClass(cls):
        cls.tmp.cleanup()

    def test_gen_data_outputs_and_determinism(self):
        for f in ("images.eslt", "gt_rotations.csv", "params.txt"):
            self.assertTrue(os.path.exists(f"{self.d}/data/{f}"))
        run("gen-data", "--volume", f"{self.d}/gt.eslt", "--num-images", 8, "--snr", 0.5, "--seed", 5,
            "--voltage-kv", 200, "--out-dir", f"{self.d}/data2")
        for f in ("images.eslt", "gt_rotations.csv"):
            self.assertTrue(filecmp.cmp(f"{self.d}/data/{f}", f"{self.d}/data2/{f}", shallow=False))
        self.assertEqual(len(rows(f"{self.d}/data/gt_rotations.csv")), 9)

    def test_so3_mesh_level0(self):
        run("so3-mesh", "--level", 0, "--out", f"{self.d}/mesh.csv")
        r = rows(f"{self.d}/mesh.csv")
        self.assertEqual(r[0], ["index", "qw", "qx", "qy", "qz"])
        self.assertEqual(len(r) - 1, 1821)

    def test_estimate_rotations_and_eval(self):
        d = self.d
        run("estimate-rotations", "--volume", f"{d}/gt.eslt", "--images", f"{d}/data/images.eslt",
            "--params", f"{d}/data/params.txt", "--mesh-level", 0, "--out-rotations", f"{d}/est.csv",
            "--out-weights", f"{d}/w.csv", "--out-metrics", f"{d}/m.csv", "--gt-rotations",
            f"{d}/data/gt_rotations.csv")
        self.assertEqual(len(rows(f"{d}/est.csv")), 9)
        w = rows(f"{d}/w.csv")
        self.assertEqual(w[0], ["image_index", "sample_index", "weight"])
        total = {}
        for i, _, x in w[1:]:
            total[i] = total.get(i, 0.0) + float(x)
        self.assertEqual(len(total), 8)
        for s in total.values():
            self.assertAlmostEqual(s, 1.0, places=9)
        m = rows(f"{d}/m.csv")
        self.assertEqual(len(m), 2)
        for col in ("mean_gamma", "mean_l0", "mean_w2_deg"):
            self.assertIn(col, m[0])
        run("eval", "--est", f"{d}/est.csv", "--gt", f"{d}/data/gt_rotations.csv", "--out", f"{d}/eval")
        self.assertTrue(os.path.exists(f"{d}/eval/errors.csv"))

    def test_refine_writes_one_row_per_iteration(self):
        d = self.d
        run("refine", "--images", f"{d}/data/images.eslt", "--init-volume", f"{d}/init.eslt",
            "--params", f"{d}/data/params.txt", "--mesh-level", 0, "--iters", 2, "--out-dir", f"{d}/ref",
            "--gt-rotations", f"{d}/data/gt_rotations.csv")
        m = rows(f"{d}/ref/metrics.csv")
        self.assertEqual(len(m), 3)
        self.assertTrue(os.path.exists(f"{d}/ref/volume_2.eslt"))

    def test_lds_check(self):
        run("lds-check", "--eta", 0.5, "--levels", 6, "--out", f"{self.d}/lds.csv")
        self.assertEqual(len(rows(f"{self.d}/lds.csv")), 7)

    def test_usage_errors_exit_2(self):
        run("gen-data", "--volume", f"{self.d}/missing.eslt", "--out-dir", f"{self.d}/x", expect=2)
        run("lds-check", "--eta", 2.5, "--out", f"{self.d}/x.csv", expect=2)
        run("lds-check", "--eta", 0.0, "--out", f"{self.d}/x.csv", expect=2)
        run("estimate-rotations", "--volume", f"{self.d}/gt.eslt", "--images", f"{self.d}/data/images.eslt",
            "--params", f"{self.d}/data/params.txt", "--j0", -1, "--out-rotations", f"{self.d}/e.csv", expect=2)
        run("no-such-command", expect=2)


if __name__ == "__main__":
    ESL = sys.argv.pop(1)
    unittest.main(verbosity=2)
