"""Dataset and artifact file formats.

Edge lists are whitespace-separated pairs, one per line, with ``#``
comments. Feature matrices are header-free CSV, one row per node. Labels
are ``node_index,label`` CSV lines where the label is 0, 1, or ``?`` for
unlabeled; nodes absent from the file are unlabeled too. Embeddings are
stored raw: two little-endian int64 giving rows and columns, then the
float64 matrix row-major.
"""

import warnings

import numpy as np

from .graph import LabelSet, build_graph, check_features


class DataFormatError(ValueError):
    """Raised for malformed data files; messages carry path and line."""


def load_edges(path):
    """Read an edge-list file into an (m, 2) int64 array."""
    rows = []
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise DataFormatError(
                    "%s:%d: expected two node indices" % (path, lineno)
                )
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                raise DataFormatError(
                    "%s:%d: node indices must be integers" % (path, lineno)
                ) from None
            if u < 0 or v < 0:
                raise DataFormatError(
                    "%s:%d: node indices must be non-negative" % (path, lineno)
                )
            rows.append((u, v))
    return np.array(rows, dtype=np.int64).reshape(-1, 2)


def _locate_feature_defect(path):
    width = None
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.strip()
            if not line:
                continue
            parts = line.split(",")
            if width is None:
                width = len(parts)
            elif len(parts) != width:
                raise DataFormatError(
                    "%s:%d: row has %d columns, expected %d"
                    % (path, lineno, len(parts), width)
                )
            for token in parts:
                try:
                    float(token)
                except ValueError:
                    raise DataFormatError(
                        "%s:%d: %r is not a number" % (path, lineno, token)
                    ) from None


def load_features(path):
    """Read a header-free CSV feature matrix."""
    try:
        with warnings.catch_warnings():
            # an empty file becomes the "no feature rows" error below
            warnings.simplefilter("ignore", UserWarning)
            matrix = np.loadtxt(path, delimiter=",", ndmin=2, dtype=np.float64)
    except ValueError:
        _locate_feature_defect(path)
        raise DataFormatError("%s: malformed feature matrix" % path) from None
    if matrix.size == 0:
        raise DataFormatError("%s: no feature rows" % path)
    return matrix


def load_labels(path, node_count):
    """Read node labels; nodes missing from the file count as unlabeled."""
    node_count = int(node_count)
    values = np.full(node_count, -1, dtype=np.int8)
    seen = np.zeros(node_count, dtype=bool)
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if lineno == 1 and line.replace(" ", "") == "node_index,label":
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != 2:
                raise DataFormatError(
                    "%s:%d: expected 'node_index,label'" % (path, lineno)
                )
            try:
                index = int(parts[0])
            except ValueError:
                raise DataFormatError(
                    "%s:%d: node index must be an integer" % (path, lineno)
                ) from None
            if not 0 <= index < node_count:
                raise DataFormatError(
                    "%s:%d: node index %d outside 0..%d"
                    % (path, lineno, index, node_count - 1)
                )
            if seen[index]:
                raise DataFormatError(
                    "%s:%d: node %d labeled twice" % (path, lineno, index)
                )
            token = parts[1]
            if token == "?":
                label = -1
            elif token in ("0", "1"):
                label = int(token)
            else:
                raise DataFormatError(
                    "%s:%d: label must be 0, 1, or ?" % (path, lineno)
                )
            values[index] = label
            seen[index] = True
    return LabelSet(values)


def load_dataset(edges_path, features_path, labels_path, symmetrize=True):
    """Load a full dataset; the feature row count fixes the node count."""
    features = load_features(features_path)
    node_count = features.shape[0]
    edges = load_edges(edges_path)
    if edges.size and edges.max() >= node_count:
        raise DataFormatError(
            "%s: edge references node %d but features cover %d nodes"
            % (edges_path, int(edges.max()), node_count)
        )
    g = build_graph(edges, node_count, symmetrize=symmetrize)
    labels = load_labels(labels_path, node_count)
    return g, check_features(features, node_count), labels


def write_edges(path, g):
    """Write each undirected edge once, smaller endpoint first."""
    rows = np.repeat(np.arange(g.node_count, dtype=np.int64), g.degrees())
    upper = rows <= g.indices
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("# one undirected edge per line\n")
        for u, v in zip(rows[upper], g.indices[upper]):
            handle.write("%d %d\n" % (u, v))


def write_features(path, features):
    np.savetxt(path, np.asarray(features, dtype=np.float64),
               delimiter=",", fmt="%.17g")


def write_labels(path, labels):
    """Write one line per node; unlabeled nodes get '?'."""
    symbols = {1: "1", 0: "0", -1: "?"}
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("node_index,label\n")
        for index, value in enumerate(labels.values):
            handle.write("%d,%s\n" % (index, symbols[int(value)]))


def save_embeddings(path, matrix):
    """Write an embedding matrix in the raw binary layout."""
    arr = np.ascontiguousarray(matrix, dtype=np.float64)
    if arr.ndim != 2:
        raise DataFormatError("embeddings must be a 2-D matrix")
    with open(path, "wb") as handle:
        handle.write(np.array(arr.shape, dtype="<i8").tobytes())
        handle.write(arr.astype("<f8", copy=False).tobytes(order="C"))


def load_embeddings(path):
    with open(path, "rb") as handle:
        blob = handle.read()
    if len(blob) < 16:
        raise DataFormatError("%s: missing embedding header" % path)
    rows, cols = (int(v) for v in np.frombuffer(blob[:16], dtype="<i8"))
    if rows < 1 or cols < 1:
        raise DataFormatError("%s: invalid embedding shape %dx%d"
                              % (path, rows, cols))
    expected = 16 + rows * cols * 8
    if len(blob) != expected:
        raise DataFormatError(
            "%s: expected %d bytes for a %dx%d matrix, found %d"
            % (path, expected, rows, cols, len(blob))
        )
    return np.frombuffer(blob[16:], dtype="<f8").reshape(rows, cols).copy()


def convert_citation_dataset(content_path, cites_path, positive_class):
    """Convert raw citation files to the package's dataset arrays.

    The content file has one node per line: an id, tab-separated 0/1
    features, and a class string as the last field. The cites file lists
    one directed citation per line as a pair of ids; direction is dropped.
    Nodes of `positive_class` become positive, every other class negative.
    Returns ``(edges, features, labels)`` with nodes numbered in content
    file order.
    """
    index_of = {}
    feature_rows = []
    classes = []
    with open(content_path, "r", encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) < 3:
                raise DataFormatError(
                    "%s:%d: expected id, features, class" % (content_path, lineno)
                )
            node_id = parts[0]
            if node_id in index_of:
                raise DataFormatError(
                    "%s:%d: duplicate node id %s" % (content_path, lineno, node_id)
                )
            index_of[node_id] = len(feature_rows)
            try:
                feature_rows.append([float(v) for v in parts[1:-1]])
            except ValueError:
                raise DataFormatError(
                    "%s:%d: malformed feature value" % (content_path, lineno)
                ) from None
            classes.append(parts[-1])
    if not feature_rows:
        raise DataFormatError("%s: no nodes" % content_path)
    if positive_class not in classes:
        raise DataFormatError(
            "class %r does not occur in %s" % (positive_class, content_path)
        )

    edges = []
    with open(cites_path, "r", encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise DataFormatError(
                    "%s:%d: expected two node ids" % (cites_path, lineno)
                )
            try:
                edges.append((index_of[parts[0]], index_of[parts[1]]))
            except KeyError as missing:
                raise DataFormatError(
                    "%s:%d: unknown node id %s" % (cites_path, lineno, missing)
                ) from None

    features = np.asarray(feature_rows, dtype=np.float64)
    labels = np.array([1 if c == positive_class else 0 for c in classes],
                      dtype=np.int8)
    return np.array(edges, dtype=np.int64).reshape(-1, 2), features, labels
