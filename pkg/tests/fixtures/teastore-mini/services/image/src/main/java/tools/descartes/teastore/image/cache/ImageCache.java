package tools.descartes.teastore.image.cache;

import java.util.HashMap;
import java.util.List;
import java.util.Map;

/**
 * In-memory image cache keyed by product id.
 */
public class ImageCache {

    private final Map<Long, String> images = new HashMap<>();

    public Map<Long, String> lookup(List<Long> ids) {
        Map<Long, String> result = new HashMap<>();
        for (Long id : ids) {
            String image = images.get(id);
            if (image != null) {
                result.put(id, image);
            }
        }
        return result;
    }
}
