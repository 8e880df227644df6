#![allow(dead_code)]

use std::fs;
use std::os::unix::fs::PermissionsExt;
use std::path::{Path, PathBuf};

use assertgen::corpus::{DatasetSample, InputVariant, Subset, TokenForm};
use assertgen::java::{texts, tokenize, AssertionKind};

pub fn write(path: &Path, text: &str) {
    fs::create_dir_all(path.parent().unwrap()).unwrap();
    fs::write(path, text).unwrap();
}

pub fn write_script(path: &Path, body: &str) -> PathBuf {
    write(path, &format!("#!/bin/sh\n{body}\n"));
    fs::set_permissions(path, fs::Permissions::from_mode(0o755)).unwrap();
    path.to_path_buf()
}

/// One repository with a production class and its test class. Every test
/// method pairs with a focal method by name and carries exactly one
/// acceptable assertion.
pub fn synthetic_repo(root: &Path, i: usize) {
    let cls = format!("Counter{i}");
    let pkg = format!("org.demo{i}");
    let dir = root
        .join(format!("repo{i:03}"))
        .join("src")
        .join(format!("demo{i}"));
    write(
        &dir.join(format!("{cls}.java")),
        &format!(
            r#"package {pkg};

import java.util.List;

public class {cls} {{
    private int count = {i};
    private String label = "c{i}";

    public {cls}() {{ }}

    public int increment(int by) {{
        count += by;
        return count;
    }}

    public String getLabel() {{
        return label + "-" + count;
    }}

    public boolean isEmpty() {{
        return count == 0;
    }}

    public double ratio(double d) {{
        return count / d;
    }}

    public char first() {{
        return label.charAt(0);
    }}

    public Object lookup(String key) {{
        if (key == null) {{
            throw new IllegalArgumentException("key");
        }}
        return null;
    }}
}}
"#
        ),
    );
    write(
        &dir.join(format!("{cls}Test.java")),
        &format!(
            r#"package {pkg};

import org.junit.Test;
import static org.junit.Assert.*;

public class {cls}Test {{
    @Test
    public void testIncrement() {{
        {cls} c = new {cls}();
        int v = c.increment({j});
        assertEquals({sum}, v);
    }}

    @Test
    public void testGetLabel() {{
        {cls} c = new {cls}();
        assertNotNull(c.getLabel());
    }}

    @Test
    public void testIsEmpty() {{
        {cls} counter = new {cls}();
        assertFalse(counter.isEmpty());
    }}

    @Test
    public void testRatio() {{
        {cls} c = new {cls}();
        double r = c.ratio({j}.5);
        assertTrue(r > 0.{i});
    }}

    @Test
    public void testFirst() {{
        {cls} c = new {cls}();
        char ch = c.first();
        assertEquals('c', ch);
    }}

    @Test
    public void testLookup() {{
        {cls} c = new {cls}();
        assertThrows(IllegalArgumentException.class, () -> c.lookup(null));
    }}
}}
"#,
            j = i % 7 + 1,
            sum = i + i % 7 + 1,
        ),
    );
}

pub const EXAMPLE_FOCAL: &str = "char last(String s) { return s[s.length -1]; }";
pub const EXAMPLE_TEST: &str =
    "@Test void testLast() {\n  char res = last(\"abc\");\n  assertEquals(res, 'c');\n}";

/// Repository holding the running example as two classes.
pub fn example_repo(root: &Path) {
    write(
        &root.join("fig/Last.java"),
        &format!("package fig;\nclass Last {{\n  {EXAMPLE_FOCAL}\n}}\n"),
    );
    write(
        &root.join("fig/LastTest.java"),
        &format!("package fig;\nclass LastTest {{\n{EXAMPLE_TEST}\n}}\n"),
    );
}

pub fn sample(id: &str, input: &str, truth: &str, kind: AssertionKind) -> DatasetSample {
    DatasetSample {
        sample_id: id.into(),
        input_variant: InputVariant::TestOnly,
        token_form: TokenForm::Raw,
        masked_input: texts(&tokenize(input).unwrap()),
        truth_assertion: texts(&tokenize(truth).unwrap()),
        dictionary: None,
        assertion_kind: kind,
        group_key: id.into(),
        subset: Subset::UpToTen,
    }
}
