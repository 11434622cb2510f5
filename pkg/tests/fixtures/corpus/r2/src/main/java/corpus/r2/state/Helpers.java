package corpus.r2.state;

public final class Helpers {

    private Helpers() {
    }

    public static String synchronizedView() {
        return "view";
    }
}
